#include "wavestack/featsel.hpp"

#include "wavestack/error.hpp"
#include "wavestack/log.hpp"
#include "wavestack/parallel.hpp"
#include "wavestack/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace wavestack::featsel {

FeatureMatrix FeatureMatrix::subset(std::span<const std::size_t> indices) const
{
    FeatureMatrix out;
    for (const auto i : indices) {
        out.names.push_back(names.at(i));
        out.columns.push_back(columns.at(i));
    }
    return out;
}

FeatureMatrix FeatureMatrix::head_rows(std::size_t count) const
{
    FeatureMatrix out;
    out.names = names;
    for (const auto& col : columns) {
        out.columns.emplace_back(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(std::min(count, col.size())));
    }
    return out;
}

FeatureMatrix feature_matrix(const FeatureFrame& frame)
{
    FeatureMatrix out;
    out.names = frame.names();
    for (std::size_t c = 0; c < frame.cols(); ++c) {
        out.columns.push_back(frame.column(c));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Chi-squared

ContingencyTable::ContingencyTable(std::vector<std::vector<std::size_t>> counts) : counts_(std::move(counts))
{
    const std::size_t k = classes();
    row_totals_.assign(counts_.size(), 0);
    col_totals_.assign(k, 0);
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        if (counts_[i].size() != k) {
            throw StructureError("contingency table rows have unequal class counts");
        }
        for (std::size_t j = 0; j < k; ++j) {
            row_totals_[i] += counts_[i][j];
            col_totals_[j] += counts_[i][j];
            total_ += counts_[i][j];
        }
    }
}

double ContingencyTable::expected(std::size_t i, std::size_t j) const
{
    if (total_ == 0) {
        return 0.0;
    }
    return static_cast<double>(row_totals_[i]) * static_cast<double>(col_totals_[j]) / static_cast<double>(total_);
}

double chi2_statistic(const ContingencyTable& table)
{
    double x2 = 0.0;
    for (std::size_t i = 0; i < table.intervals(); ++i) {
        for (std::size_t j = 0; j < table.classes(); ++j) {
            const double e = table.expected(i, j);
            if (e > 0.0) {
                const double diff = static_cast<double>(table.count(i, j)) - e;
                x2 += diff * diff / e;
            }
        }
    }
    return x2;
}

ContingencyTable discretize(std::span<const double> feature, std::span<const int> labels, std::size_t bins)
{
    if (bins < 2) {
        throw ConfigError("chi-squared needs at least 2 bins");
    }
    if (feature.size() != labels.size()) {
        throw ShapeError("feature has " + std::to_string(feature.size()) + " rows, labels " +
                         std::to_string(labels.size()));
    }
    for (const int l : labels) {
        if (l != 0 && l != 1) {
            throw DomainError("chi-squared labels must be binary");
        }
    }
    if (feature.empty()) {
        return ContingencyTable({});
    }
    const auto [lo_it, hi_it] = std::minmax_element(feature.begin(), feature.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<std::vector<std::size_t>> counts(bins, std::vector<std::size_t>(2, 0));
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t r = 0; r < feature.size(); ++r) {
        std::size_t bin = 0;
        if (width > 0.0) {
            const double pos = std::ceil((feature[r] - lo) / width) - 1.0;
            bin = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
        }
        ++counts[bin][static_cast<std::size_t>(labels[r])];
    }
    std::erase_if(counts, [](const std::vector<std::size_t>& row) { return row[0] + row[1] == 0; });
    return ContingencyTable(std::move(counts));
}

namespace {

void report(std::vector<std::string>* warnings, const std::string& message)
{
    if (warnings != nullptr) {
        warnings->push_back(message);
    } else {
        warn(message);
    }
}

}  // namespace

std::vector<double> chi2_scores(const FeatureMatrix& features, std::span<const int> labels, std::size_t bins,
                                std::vector<std::string>* warnings)
{
    std::vector<double> scores(features.cols());
    for (std::size_t c = 0; c < features.cols(); ++c) {
        const auto table = discretize(features.columns[c], labels, bins);
        if (table.intervals() <= 1) {
            report(warnings, "chi2: feature '" + features.names[c] + "' is constant; score 0");
            scores[c] = 0.0;
            continue;
        }
        scores[c] = chi2_statistic(table);
    }
    return scores;
}

// ---------------------------------------------------------------------------
// Trees

std::size_t DecisionTree::split_count() const
{
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return !n.is_leaf(); }));
}

double DecisionTree::predict(const FeatureMatrix& features, std::size_t row) const
{
    std::size_t node = 0;
    while (!nodes[node].is_leaf()) {
        const auto& n = nodes[node];
        node = static_cast<std::size_t>(features.columns[static_cast<std::size_t>(n.feature)][row] <= n.threshold
                                            ? n.left
                                            : n.right);
    }
    return nodes[node].value;
}

double Forest::predict(const FeatureMatrix& features, std::size_t row) const
{
    double sum = 0.0;
    for (const auto& tree : trees) {
        sum += tree.predict(features, row);
    }
    return sum / static_cast<double>(trees.size());
}

TreeTask infer_task(std::span<const double> targets)
{
    const bool binary = std::all_of(targets.begin(), targets.end(), [](double v) { return v == 0.0 || v == 1.0; });
    return binary ? TreeTask::classification : TreeTask::regression;
}

namespace {

struct NodeStats {
    double value = 0.0;
    double impurity = 0.0;
};

NodeStats node_stats(std::span<const double> y, std::span<const std::size_t> idx, TreeTask task)
{
    const double n = static_cast<double>(idx.size());
    double mean = 0.0;
    for (const auto i : idx) {
        mean += y[i];
    }
    mean /= n;
    if (task == TreeTask::classification) {
        return {mean, 2.0 * mean * (1.0 - mean)};
    }
    double ss = 0.0;
    for (const auto i : idx) {
        ss += (y[i] - mean) * (y[i] - mean);
    }
    return {mean, ss / n};
}

class TreeBuilder {
public:
    TreeBuilder(const FeatureMatrix& x, std::span<const double> y, TreeTask task, const ForestConfig& config,
                std::size_t mtry, std::size_t total, std::mt19937_64& rng)
        : x_(x), y_(y), task_(task), config_(config), mtry_(mtry), total_(static_cast<double>(total)), rng_(rng)
    {
    }

    int build(std::vector<std::size_t>& idx, std::size_t depth)
    {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        const auto stats = node_stats(y_, idx, task_);
        {
            auto& node = tree_.nodes.back();
            node.impurity = stats.impurity;
            node.value = stats.value;
            node.weight = static_cast<double>(idx.size()) / total_;
            node.samples = idx.size();
        }
        if (depth >= config_.max_depth || idx.size() < 2 * std::max<std::size_t>(config_.min_leaf, 1) ||
            stats.impurity <= 1e-14) {
            return id;
        }

        const auto split = find_split(idx, stats.impurity);
        if (split.feature < 0) {
            return id;
        }
        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        const auto& col = x_.columns[static_cast<std::size_t>(split.feature)];
        for (const auto i : idx) {
            (col[i] <= split.threshold ? left : right).push_back(i);
        }
        idx.clear();
        idx.shrink_to_fit();
        tree_.nodes[id].feature = split.feature;
        tree_.nodes[id].threshold = split.threshold;
        const int l = build(left, depth + 1);
        const int r = build(right, depth + 1);
        tree_.nodes[id].left = l;
        tree_.nodes[id].right = r;
        return id;
    }

    DecisionTree take() { return std::move(tree_); }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double gain = 0.0;
    };

    // Maximises the reduction of n * impurity. For both impurities this is
    // sum over children of (sum^2 / n) [variance] or (c0^2 + c1^2) / n [Gini].
    Split find_split(std::span<const std::size_t> idx, double impurity)
    {
        std::vector<std::size_t> order(x_.cols());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng_);

        const std::size_t n = idx.size();
        const std::size_t min_leaf = std::max<std::size_t>(config_.min_leaf, 1);
        double total_sum = 0.0;
        for (const auto i : idx) {
            total_sum += y_[i];
        }
        const double n_d = static_cast<double>(n);
        const double parent_proxy = proxy(total_sum, n_d);
        const double min_gain = 1e-10 * n_d * impurity;

        Split best;
        std::vector<std::pair<double, double>> pairs(n);
        std::size_t evaluated = 0;
        for (const auto f : order) {
            if (evaluated >= mtry_) {
                break;
            }
            const auto& col = x_.columns[f];
            for (std::size_t k = 0; k < n; ++k) {
                pairs[k] = {col[idx[k]], y_[idx[k]]};
            }
            std::sort(pairs.begin(), pairs.end());
            if (pairs.front().first == pairs.back().first) {
                continue;  // constant here; does not count towards mtry
            }
            ++evaluated;
            double left_sum = 0.0;
            for (std::size_t k = 0; k + 1 < n; ++k) {
                left_sum += pairs[k].second;
                const std::size_t n_left = k + 1;
                if (pairs[k].first == pairs[k + 1].first || n_left < min_leaf || n - n_left < min_leaf) {
                    continue;
                }
                const double nl = static_cast<double>(n_left);
                const double gain = proxy(left_sum, nl) + proxy(total_sum - left_sum, n_d - nl) - parent_proxy;
                if (gain > best.gain && gain > min_gain) {
                    double threshold = 0.5 * (pairs[k].first + pairs[k + 1].first);
                    if (!(threshold < pairs[k + 1].first)) {
                        threshold = pairs[k].first;
                    }
                    best = {static_cast<int>(f), threshold, gain};
                }
            }
        }
        return best;
    }

    double proxy(double sum, double count) const
    {
        if (task_ == TreeTask::classification) {
            const double ones = sum;
            const double zeros = count - sum;
            return (ones * ones + zeros * zeros) / count;
        }
        return sum * sum / count;
    }

    const FeatureMatrix& x_;
    std::span<const double> y_;
    TreeTask task_;
    const ForestConfig& config_;
    std::size_t mtry_;
    double total_;
    std::mt19937_64& rng_;
    DecisionTree tree_;
};

}  // namespace

Forest fit_forest(const FeatureMatrix& features, std::span<const double> targets, const ForestConfig& config)
{
    if (features.cols() == 0) {
        throw ConfigError("cannot fit a forest on a frame with no features");
    }
    const std::size_t n = features.rows();
    if (n < 2) {
        throw SizeError("forest needs at least 2 samples");
    }
    if (targets.size() != n) {
        throw ShapeError("forest targets have " + std::to_string(targets.size()) + " rows, features " +
                         std::to_string(n));
    }
    for (const auto& col : features.columns) {
        if (col.size() != n) {
            throw ShapeError("feature columns have unequal lengths");
        }
    }
    if (config.trees == 0) {
        throw ConfigError("forest needs at least one tree");
    }

    Forest forest;
    forest.task = config.task.value_or(infer_task(targets));
    forest.features = features.cols();
    forest.seed = config.seed;
    forest.trees.resize(config.trees);
    const std::size_t mtry = config.max_features.value_or(
        std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(features.cols()))))));

    parallel_for(
        config.trees,
        [&](std::size_t t) {
            std::mt19937_64 rng(derive_seed(config.seed, t));
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            std::vector<std::size_t> sample(n);
            for (auto& s : sample) {
                s = pick(rng);
            }
            TreeBuilder builder(features, targets, forest.task, config, mtry, n, rng);
            builder.build(sample, 0);
            forest.trees[t] = builder.take();
        },
        config.threads);
    return forest;
}

Forest fit_forest(const FeatureFrame& frame, std::span<const double> targets, const ForestConfig& config)
{
    return fit_forest(feature_matrix(frame), targets, config);
}

double node_importance(const DecisionTree& tree, std::size_t node)
{
    const auto& n = tree.nodes.at(node);
    if (n.is_leaf()) {
        return 0.0;
    }
    const auto& l = tree.nodes.at(static_cast<std::size_t>(n.left));
    const auto& r = tree.nodes.at(static_cast<std::size_t>(n.right));
    return n.weight * n.impurity - l.weight * l.impurity - r.weight * r.impurity;
}

std::vector<double> tree_importance(const DecisionTree& tree, std::size_t features)
{
    std::vector<double> fi(features, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < tree.nodes.size(); ++j) {
        if (tree.nodes[j].is_leaf()) {
            continue;
        }
        const double ni = node_importance(tree, j);
        fi.at(static_cast<std::size_t>(tree.nodes[j].feature)) += ni;
        total += ni;
    }
    if (total <= 0.0) {
        std::fill(fi.begin(), fi.end(), 0.0);
        return fi;
    }
    for (auto& v : fi) {
        v /= total;
    }
    const double norm = std::accumulate(fi.begin(), fi.end(), 0.0);
    for (auto& v : fi) {
        v /= norm;
    }
    return fi;
}

std::vector<double> forest_importance(const Forest& forest, std::vector<std::string>* warnings)
{
    std::vector<double> scores(forest.features, 0.0);
    std::size_t contributing = 0;
    for (const auto& tree : forest.trees) {
        if (tree.split_count() == 0) {
            continue;
        }
        const auto fi = tree_importance(tree, forest.features);
        if (std::accumulate(fi.begin(), fi.end(), 0.0) <= 0.0) {
            continue;
        }
        for (std::size_t i = 0; i < fi.size(); ++i) {
            scores[i] += fi[i];
        }
        ++contributing;
    }
    if (contributing == 0) {
        report(warnings, "forest has no informative splits; importance is uniform");
        std::fill(scores.begin(), scores.end(), 1.0 / static_cast<double>(std::max<std::size_t>(forest.features, 1)));
        return scores;
    }
    for (auto& s : scores) {
        s /= static_cast<double>(contributing);
    }
    return scores;
}

// ---------------------------------------------------------------------------
// Selectors

const char* to_string(Method method)
{
    switch (method) {
    case Method::chi2: return "chi2";
    case Method::rfe: return "rfe";
    case Method::embedded: return "embedded";
    }
    return "?";
}

Method parse_method(const std::string& text)
{
    if (text == "chi2") {
        return Method::chi2;
    }
    if (text == "rfe") {
        return Method::rfe;
    }
    if (text == "embedded") {
        return Method::embedded;
    }
    throw ConfigError("unknown selector '" + text + "' (expected chi2, rfe, or embedded)");
}

namespace {

// Indices sorted by descending score; ties keep column order.
std::vector<std::size_t> rank_descending(std::span<const double> scores)
{
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

void check_k(std::size_t k, std::size_t features)
{
    if (k == 0) {
        throw ConfigError("k must be at least 1");
    }
    if (k > features) {
        throw ConfigError("k = " + std::to_string(k) + " exceeds the " + std::to_string(features) +
                          " available features");
    }
}

}  // namespace

SelectionResult select_chi2(const FeatureMatrix& features, std::span<const int> labels, std::size_t k,
                            std::size_t bins)
{
    check_k(k, features.cols());
    SelectionResult result;
    result.method = Method::chi2;
    result.k = k;
    const auto scores = chi2_scores(features, labels, bins, &result.warnings);
    for (std::size_t c = 0; c < features.cols(); ++c) {
        result.scores[features.names[c]] = scores[c];
    }
    const auto order = rank_descending(scores);
    for (std::size_t i = 0; i < k; ++i) {
        result.selected.push_back(features.names[order[i]]);
    }
    return result;
}

SelectionResult rfe(const FeatureMatrix& features, std::span<const double> targets, std::size_t k,
                    std::size_t step, const ForestConfig& forest)
{
    check_k(k, features.cols());
    if (step == 0) {
        throw ConfigError("rfe step must be at least 1");
    }
    SelectionResult result;
    result.method = Method::rfe;
    result.k = k;

    std::vector<std::size_t> active(features.cols());
    std::iota(active.begin(), active.end(), std::size_t{0});
    std::vector<double> last_importance;
    std::size_t round = 0;
    while (active.size() > k) {
        ++round;
        ForestConfig cfg = forest;
        cfg.seed = derive_seed(forest.seed, round);
        const auto fitted = fit_forest(features.subset(active), targets, cfg);
        const auto importance = forest_importance(fitted, &result.warnings);
        // ascending importance; among ties the later column goes first
        std::vector<std::size_t> order(active.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (importance[a] != importance[b]) {
                return importance[a] < importance[b];
            }
            return a > b;
        });
        const std::size_t drop = std::min(step, active.size() - k);
        std::vector<bool> removed(active.size(), false);
        for (std::size_t i = 0; i < drop; ++i) {
            removed[order[i]] = true;
            result.scores[features.names[active[order[i]]]] = static_cast<double>(round);
        }
        std::vector<std::size_t> next;
        std::vector<double> kept_importance;
        for (std::size_t i = 0; i < active.size(); ++i) {
            if (!removed[i]) {
                next.push_back(active[i]);
                kept_importance.push_back(importance[i]);
            }
        }
        active = std::move(next);
        last_importance = std::move(kept_importance);
    }

    std::vector<std::size_t> order(active.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (!last_importance.empty()) {
        order = rank_descending(last_importance);
    }
    for (const auto i : order) {
        result.selected.push_back(features.names[active[i]]);
        result.scores[features.names[active[i]]] = static_cast<double>(round + 1);
    }
    return result;
}

double pearson(std::span<const double> a, std::span<const double> b)
{
    const std::size_t n = std::min(a.size(), b.size());
    if (n < 2) {
        return 0.0;
    }
    double ma = 0.0;
    double mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) {
        return 0.0;
    }
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

SelectionResult embedded_select(const FeatureMatrix& features, std::span<const double> targets, std::size_t k,
                                double corr_cap, const ForestConfig& forest)
{
    check_k(k, features.cols());
    if (!(corr_cap > 0.0 && corr_cap <= 1.0)) {
        throw ConfigError("corr_cap must lie in (0, 1]");
    }
    SelectionResult result;
    result.method = Method::embedded;
    result.k = k;
    const auto importance = forest_importance(fit_forest(features, targets, forest), &result.warnings);

    for (std::size_t c = 0; c < features.cols(); ++c) {
        result.scores[features.names[c]] = importance[c];
    }
    std::vector<std::size_t> accepted;
    for (const auto c : rank_descending(importance)) {
        if (accepted.size() == k) {
            break;
        }
        const bool collinear = std::any_of(accepted.begin(), accepted.end(), [&](std::size_t a) {
            return std::abs(pearson(features.columns[c], features.columns[a])) > corr_cap;
        });
        if (!collinear) {
            accepted.push_back(c);
        }
    }
    if (accepted.size() < k) {
        const std::string msg = "embedded selection found only " + std::to_string(accepted.size()) +
                                " features below the correlation cap (requested " + std::to_string(k) + ")";
        result.warnings.push_back(msg);
        warn(msg);
    }
    for (const auto c : accepted) {
        result.selected.push_back(features.names[c]);
    }
    return result;
}

}  // namespace wavestack::featsel
