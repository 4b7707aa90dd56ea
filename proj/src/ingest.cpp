#include "wavestack/ingest.hpp"

#include "wavestack/error.hpp"
#include "wavestack/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace wavestack {

bool is_missing(double value) noexcept { return std::isnan(value); }

double missing_value() noexcept { return std::numeric_limits<double>::quiet_NaN(); }

void TimeSeries::validate() const
{
    if (timestamps.size() != values.size()) {
        throw StructureError("series '" + name + "' has " + std::to_string(timestamps.size()) +
                             " timestamps but " + std::to_string(values.size()) + " values");
    }
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
        if (!(timestamps[i - 1] < timestamps[i])) {
            throw StructureError("series '" + name + "' timestamps not strictly increasing at " +
                                 timestamps[i].to_string());
        }
    }
}

// ---------------------------------------------------------------------------
// FeatureFrame

FeatureFrame::FeatureFrame(std::vector<Date> dates, std::string target)
    : dates_(std::move(dates)), target_(std::move(target))
{
}

void FeatureFrame::add_column(std::string name, std::vector<double> values)
{
    if (index_.count(name) != 0) {
        throw SchemaError("duplicate column '" + name + "'");
    }
    if (values.size() != dates_.size()) {
        throw StructureError("column '" + name + "' has " + std::to_string(values.size()) +
                             " rows, frame has " + std::to_string(dates_.size()));
    }
    index_.emplace(name, columns_.size());
    names_.push_back(std::move(name));
    columns_.push_back(std::move(values));
}

void FeatureFrame::set_column(const std::string& name, std::vector<double> values)
{
    if (values.size() != dates_.size()) {
        throw StructureError("column '" + name + "' length mismatch");
    }
    columns_.at(index_of(name)) = std::move(values);
}

bool FeatureFrame::has_column(const std::string& name) const { return index_.count(name) != 0; }

std::size_t FeatureFrame::index_of(const std::string& name) const
{
    const auto it = index_.find(name);
    if (it == index_.end()) {
        throw SchemaError("unknown column '" + name + "'");
    }
    return it->second;
}

const std::vector<double>& FeatureFrame::column(const std::string& name) const
{
    return columns_[index_of(name)];
}

TimeSeries FeatureFrame::series(const std::string& name) const
{
    return TimeSeries{name, dates_, column(name)};
}

FeatureFrame FeatureFrame::slice_rows(std::size_t begin, std::size_t end) const
{
    if (begin > end || end > rows()) {
        throw SizeError("row slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                        ") outside frame of " + std::to_string(rows()) + " rows");
    }
    FeatureFrame out(std::vector<Date>(dates_.begin() + static_cast<std::ptrdiff_t>(begin),
                                       dates_.begin() + static_cast<std::ptrdiff_t>(end)),
                     target_);
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        out.add_column(names_[c], std::vector<double>(columns_[c].begin() + static_cast<std::ptrdiff_t>(begin),
                                                      columns_[c].begin() + static_cast<std::ptrdiff_t>(end)));
    }
    return out;
}

FeatureFrame FeatureFrame::select_columns(std::span<const std::string> names) const
{
    FeatureFrame out(dates_, target_);
    bool has_target = false;
    for (const auto& name : names) {
        out.add_column(name, column(name));
        has_target = has_target || name == target_;
    }
    if (!has_target && has_column(target_)) {
        out.add_column(target_, column(target_));
    }
    return out;
}

std::size_t FeatureFrame::count_missing() const
{
    std::size_t count = 0;
    for (const auto& col : columns_) {
        count += static_cast<std::size_t>(std::count_if(col.begin(), col.end(), is_missing));
    }
    return count;
}

void FeatureFrame::validate() const
{
    for (std::size_t i = 1; i < dates_.size(); ++i) {
        if (!(dates_[i - 1] < dates_[i])) {
            throw StructureError("frame dates not strictly increasing at " + dates_[i].to_string());
        }
    }
    if (!has_column(target_)) {
        throw SchemaError("target column '" + target_ + "' missing");
    }
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        if (columns_[c].size() != dates_.size()) {
            throw StructureError("column '" + names_[c] + "' length mismatch");
        }
    }
}

bool operator==(const FeatureFrame& a, const FeatureFrame& b)
{
    if (a.dates_ != b.dates_ || a.target_ != b.target_ || a.names_ != b.names_) {
        return false;
    }
    for (std::size_t c = 0; c < a.columns_.size(); ++c) {
        const auto& x = a.columns_[c];
        const auto& y = b.columns_[c];
        for (std::size_t i = 0; i < x.size(); ++i) {
            const bool both_missing = is_missing(x[i]) && is_missing(y[i]);
            if (!both_missing && x[i] != y[i]) {
                return false;
            }
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_line(const std::string& line)
{
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream stream(line);
    while (std::getline(stream, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

std::string trim(std::string s)
{
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

}  // namespace

FeatureFrame load_csv(const std::filesystem::path& path, std::span<const std::string> schema,
                      const std::string& target)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(path.string() + ": empty file");
    }
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) {
        line.erase(0, 3);  // UTF-8 BOM
    }
    auto header = split_line(line);
    for (auto& h : header) {
        h = trim(h);
    }
    if (header.empty() || header[0] != "date") {
        throw SchemaError(path.string() + ": first column must be 'date'");
    }

    std::map<std::string, std::size_t> header_index;
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (!header_index.emplace(header[c], c).second) {
            throw SchemaError(path.string() + ": duplicate column '" + header[c] + "'");
        }
    }

    std::vector<std::string> wanted;
    if (schema.empty()) {
        wanted.assign(header.begin() + 1, header.end());
    } else {
        wanted.assign(schema.begin(), schema.end());
        if (std::find(wanted.begin(), wanted.end(), target) == wanted.end() && header_index.count(target) != 0) {
            wanted.insert(wanted.begin(), target);
        }
    }
    std::vector<std::size_t> source;
    for (const auto& name : wanted) {
        const auto it = header_index.find(name);
        if (it == header_index.end()) {
            throw SchemaError(path.string() + ": column '" + name + "' not in header");
        }
        source.push_back(it->second);
    }

    struct Row {
        Date date;
        std::vector<double> values;
        std::size_t line_no;
    };
    std::vector<Row> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (trim(line).empty()) {
            continue;
        }
        const auto cells = split_line(line);
        if (cells.size() != header.size()) {
            throw ParseError(path.string() + ": row " + std::to_string(line_no) + " has " +
                             std::to_string(cells.size()) + " cells, header has " +
                             std::to_string(header.size()));
        }
        Row row{Date::parse(trim(cells[0])), {}, line_no};
        row.values.reserve(source.size());
        for (std::size_t k = 0; k < source.size(); ++k) {
            const std::string cell = trim(cells[source[k]]);
            if (cell.empty()) {
                row.values.push_back(missing_value());
                continue;
            }
            char* end = nullptr;
            const double value = std::strtod(cell.c_str(), &end);
            if (end != cell.c_str() + cell.size() || !std::isfinite(value)) {
                throw ParseError(path.string() + ": row " + std::to_string(line_no) + ", column '" +
                                 wanted[k] + "': non-numeric cell '" + cell + "'");
            }
            row.values.push_back(value);
        }
        rows.push_back(std::move(row));
    }

    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].date == rows[i - 1].date) {
            throw SchemaError(path.string() + ": duplicate date " + rows[i].date.to_string());
        }
    }

    std::vector<Date> dates;
    dates.reserve(rows.size());
    for (const auto& r : rows) {
        dates.push_back(r.date);
    }
    FeatureFrame frame(std::move(dates), target);
    for (std::size_t k = 0; k < wanted.size(); ++k) {
        std::vector<double> col;
        col.reserve(rows.size());
        for (const auto& r : rows) {
            col.push_back(r.values[k]);
        }
        frame.add_column(wanted[k], std::move(col));
    }
    if (!frame.has_column(target)) {
        throw SchemaError(path.string() + ": target column '" + target + "' missing");
    }
    return frame;
}

void write_csv(const std::filesystem::path& path, const FeatureFrame& frame)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "date";
    for (const auto& name : frame.names()) {
        out << ',' << name;
    }
    out << '\n';
    char buf[64];
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        out << frame.dates()[r].to_string();
        for (std::size_t c = 0; c < frame.cols(); ++c) {
            out << ',';
            const double v = frame.column(c)[r];
            if (!is_missing(v)) {
                std::snprintf(buf, sizeof(buf), "%.17g", v);
                out << buf;
            }
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Imputation

std::vector<double> interpolate_values(std::span<const double> values, const std::string& name)
{
    std::vector<std::size_t> present;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!is_missing(values[i])) {
            present.push_back(i);
        }
    }
    std::vector<double> out(values.begin(), values.end());
    if (present.size() == values.size()) {
        return out;
    }
    if (present.empty()) {
        throw ImputationError("column '" + name + "' has no present values");
    }
    for (std::size_t i = 0; i < present.front(); ++i) {
        out[i] = values[present.front()];
    }
    for (std::size_t i = present.back() + 1; i < values.size(); ++i) {
        out[i] = values[present.back()];
    }
    for (std::size_t k = 1; k < present.size(); ++k) {
        const std::size_t lo = present[k - 1];
        const std::size_t hi = present[k];
        const double span = static_cast<double>(hi - lo);
        for (std::size_t i = lo + 1; i < hi; ++i) {
            const double t = static_cast<double>(i - lo) / span;
            out[i] = values[lo] + t * (values[hi] - values[lo]);
        }
    }
    return out;
}

FeatureFrame interpolate_missing(const FeatureFrame& frame)
{
    FeatureFrame out(frame.dates(), frame.target());
    for (std::size_t c = 0; c < frame.cols(); ++c) {
        out.add_column(frame.names()[c], interpolate_values(frame.column(c), frame.names()[c]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Isolation forest

double average_path_length(std::size_t n)
{
    if (n <= 1) {
        return 0.0;
    }
    if (n == 2) {
        return 1.0;
    }
    constexpr double euler_gamma = 0.5772156649015329;
    const double m = static_cast<double>(n - 1);
    const double harmonic = std::log(m) + euler_gamma;
    return 2.0 * harmonic - 2.0 * m / static_cast<double>(n);
}

namespace {

struct TreeBuilder {
    std::span<const std::vector<double>> rows;
    std::size_t height_limit;
    std::mt19937_64& rng;
    IsolationForest::Tree nodes;

    int build(std::vector<std::size_t>& idx, std::size_t depth)
    {
        const int id = static_cast<int>(nodes.size());
        nodes.push_back({});
        nodes[id].size = idx.size();
        if (depth >= height_limit || idx.size() <= 1) {
            return id;
        }
        const std::size_t width = rows[idx.front()].size();
        std::vector<std::size_t> candidates;
        std::vector<std::pair<double, double>> ranges(width);
        for (std::size_t f = 0; f < width; ++f) {
            double lo = rows[idx.front()][f];
            double hi = lo;
            for (const auto i : idx) {
                lo = std::min(lo, rows[i][f]);
                hi = std::max(hi, rows[i][f]);
            }
            ranges[f] = {lo, hi};
            if (lo < hi) {
                candidates.push_back(f);
            }
        }
        if (candidates.empty()) {
            return id;
        }
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        const std::size_t feature = candidates[pick(rng)];
        const auto [lo, hi] = ranges[feature];
        std::uniform_real_distribution<double> uniform(lo, hi);
        double split = uniform(rng);
        if (!(split > lo)) {
            split = 0.5 * (lo + hi);
        }
        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (const auto i : idx) {
            (rows[i][feature] < split ? left : right).push_back(i);
        }
        nodes[id].feature = static_cast<int>(feature);
        nodes[id].split = split;
        const int l = build(left, depth + 1);
        const int r = build(right, depth + 1);
        nodes[id].left = l;
        nodes[id].right = r;
        return id;
    }
};


}  // namespace

void IsolationForest::fit(std::span<const std::vector<double>> rows, const IsolationForestConfig& config)
{
    if (rows.empty()) {
        throw SizeError("isolation forest needs at least one row");
    }
    if (config.trees == 0) {
        throw ConfigError("isolation forest needs at least one tree");
    }
    if (config.subsample && *config.subsample > rows.size()) {
        throw ConfigError("isolation forest subsample " + std::to_string(*config.subsample) +
                          " exceeds " + std::to_string(rows.size()) + " rows");
    }
    if (config.subsample && *config.subsample == 0) {
        throw ConfigError("isolation forest subsample must be positive");
    }
    subsample_ = config.subsample.value_or(std::min<std::size_t>(256, rows.size()));
    const auto height_limit =
        static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(std::max<std::size_t>(subsample_, 2)))));

    trees_.clear();
    trees_.reserve(config.trees);
    std::vector<std::size_t> all(rows.size());
    for (std::size_t t = 0; t < config.trees; ++t) {
        std::mt19937_64 rng(derive_seed(config.seed, t));
        std::iota(all.begin(), all.end(), std::size_t{0});
        // partial Fisher-Yates: first subsample_ entries are the sample
        for (std::size_t i = 0; i < subsample_; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
            std::swap(all[i], all[pick(rng)]);
        }
        std::vector<std::size_t> sample(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(subsample_));
        TreeBuilder builder{rows, height_limit, rng, {}};
        builder.build(sample, 0);
        trees_.push_back(std::move(builder.nodes));
    }
}

double IsolationForest::path_length(std::span<const double> row, const Tree& tree) const
{
    int node = 0;
    double depth = 0.0;
    while (tree[node].feature >= 0) {
        node = row[static_cast<std::size_t>(tree[node].feature)] < tree[node].split ? tree[node].left
                                                                                    : tree[node].right;
        depth += 1.0;
    }
    return depth + average_path_length(tree[node].size);
}

double IsolationForest::score(std::span<const double> row) const
{
    double total = 0.0;
    for (const auto& tree : trees_) {
        total += path_length(row, tree);
    }
    const double mean = total / static_cast<double>(trees_.size());
    const double norm = average_path_length(subsample_);
    if (norm <= 0.0) {
        return 0.5;
    }
    return std::exp2(-mean / norm);
}

std::vector<std::vector<double>> frame_rows(const FeatureFrame& frame)
{
    std::vector<std::vector<double>> rows(frame.rows(), std::vector<double>(frame.cols()));
    for (std::size_t c = 0; c < frame.cols(); ++c) {
        const auto& col = frame.column(c);
        for (std::size_t r = 0; r < frame.rows(); ++r) {
            rows[r][c] = col[r];
        }
    }
    return rows;
}

OutlierResult isolation_forest_filter(const FeatureFrame& frame, const IsolationForestConfig& config)
{
    if (!(config.contamination >= 0.0 && config.contamination < 0.5)) {
        throw ConfigError("contamination must lie in [0, 0.5), got " + std::to_string(config.contamination));
    }
    if (frame.count_missing() != 0) {
        throw ImputationError("isolation forest requires a fully imputed frame");
    }
    const auto rows = frame_rows(frame);
    IsolationForest forest;
    forest.fit(rows, config);

    const auto n = rows.size();
    const auto flag_count = static_cast<std::size_t>(
        std::ceil(config.contamination * static_cast<double>(n) - 1e-9));
    std::vector<double> scores(n);
    for (std::size_t r = 0; r < n; ++r) {
        scores[r] = forest.score(rows[r]);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    OutlierResult result{frame, {}};
    if (flag_count == 0) {
        return result;
    }
    result.flagged.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(flag_count, n)));
    std::sort(result.flagged.begin(), result.flagged.end());

    FeatureFrame masked(frame.dates(), frame.target());
    for (std::size_t c = 0; c < frame.cols(); ++c) {
        auto col = frame.column(c);
        for (const auto r : result.flagged) {
            col[r] = missing_value();
        }
        masked.add_column(frame.names()[c], std::move(col));
    }
    result.frame = interpolate_missing(masked);
    return result;
}

// ---------------------------------------------------------------------------
// Labels and targets

namespace {

void check_horizon(std::size_t n, std::size_t horizon_days)
{
    if (horizon_days == 0) {
        throw ConfigError("horizon must be at least one day");
    }
    if (n < horizon_days + 1) {
        throw SizeError("series of length " + std::to_string(n) + " is too short for horizon " +
                        std::to_string(horizon_days));
    }
}

}  // namespace

std::vector<int> make_labels(std::span<const double> prices, std::size_t horizon_days)
{
    check_horizon(prices.size(), horizon_days);
    std::vector<int> labels(prices.size() - horizon_days);
    for (std::size_t t = 0; t < labels.size(); ++t) {
        labels[t] = prices[t + horizon_days] > prices[t] ? 1 : 0;
    }
    return labels;
}

TimeSeries make_labels(const TimeSeries& prices, std::size_t horizon_days)
{
    const auto labels = make_labels(prices.values, horizon_days);
    TimeSeries out{prices.name + "_up(" + std::to_string(horizon_days) + ")",
                   std::vector<Date>(prices.timestamps.begin(), prices.timestamps.begin() +
                                                                    static_cast<std::ptrdiff_t>(labels.size())),
                   std::vector<double>(labels.begin(), labels.end())};
    return out;
}

std::vector<double> make_regression_targets(std::span<const double> prices, std::size_t horizon_days)
{
    check_horizon(prices.size(), horizon_days);
    return std::vector<double>(prices.begin() + static_cast<std::ptrdiff_t>(horizon_days), prices.end());
}

TimeSeries make_regression_targets(const TimeSeries& prices, std::size_t horizon_days)
{
    auto values = make_regression_targets(std::span<const double>(prices.values), horizon_days);
    std::vector<Date> stamps(prices.timestamps.begin(),
                             prices.timestamps.begin() + static_cast<std::ptrdiff_t>(values.size()));
    return TimeSeries{prices.name + "_ahead(" + std::to_string(horizon_days) + ")", std::move(stamps),
                      std::move(values)};
}

// ---------------------------------------------------------------------------
// Splits

std::optional<DateInterval> named_interval(const std::string& name)
{
    const Date start = Date::from_ymd(2013, 4, 1);
    if (name == "I") {
        return DateInterval{"I", start, Date::from_ymd(2016, 4, 1)};
    }
    if (name == "II") {
        return DateInterval{"II", start, Date::from_ymd(2017, 4, 1)};
    }
    if (name == "III") {
        return DateInterval{"III", start, Date::from_ymd(2019, 12, 31)};
    }
    return std::nullopt;
}

void SplitSpec::validate() const
{
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
        throw ConfigError("train_fraction must lie in (0, 1]");
    }
    if (horizon_days == 0) {
        throw ConfigError("horizon must be positive");
    }
    if (interval && interval->end < interval->begin) {
        throw ConfigError("interval '" + interval->name + "' ends before it begins");
    }
}

std::size_t train_rows(std::size_t rows, double train_fraction)
{
    // Guard against 0.8 * n landing a hair below an integer.
    return static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(rows) + 1e-9));
}

FeatureFrame restrict_to_interval(const FeatureFrame& frame, const DateInterval& interval)
{
    if (frame.rows() == 0 || interval.begin < frame.dates().front() || frame.dates().back() < interval.end) {
        throw SizeError("interval '" + interval.name + "' [" + interval.begin.to_string() + ", " +
                        interval.end.to_string() + "] is not covered by the frame");
    }
    const auto& d = frame.dates();
    const auto lo = std::lower_bound(d.begin(), d.end(), interval.begin) - d.begin();
    const auto hi = std::upper_bound(d.begin(), d.end(), interval.end) - d.begin();
    return frame.slice_rows(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi));
}

std::pair<FeatureFrame, FeatureFrame> chronological_split(const FeatureFrame& frame, const SplitSpec& spec)
{
    spec.validate();
    const FeatureFrame scoped = spec.interval ? restrict_to_interval(frame, *spec.interval) : frame;
    const std::size_t n = scoped.rows();
    const std::size_t n_train = train_rows(n, spec.train_fraction);
    if (n_train == 0 || n_train >= n) {
        throw SizeError("split of " + std::to_string(n) + " rows at fraction " +
                        std::to_string(spec.train_fraction) + " leaves an empty partition");
    }
    return {scoped.slice_rows(0, n_train), scoped.slice_rows(n_train, n)};
}

}  // namespace wavestack
