#include "wavestack/pipeline.hpp"

#include "wavestack/error.hpp"
#include "wavestack/featsel.hpp"
#include "wavestack/indicators.hpp"
#include "wavestack/ingest.hpp"
#include "wavestack/log.hpp"
#include "wavestack/metrics.hpp"
#include "wavestack/random.hpp"
#include "wavestack/stack.hpp"
#include "wavestack/wavelet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace wavestack::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Files

std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Remembers what a stage wrote so a failure can remove it.
class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }
    Outputs(const Outputs&) = delete;
    Outputs& operator=(const Outputs&) = delete;
    ~Outputs()
    {
        if (!committed_) {
            std::error_code ec;
            for (const auto& p : written_) {
                fs::remove_all(p, ec);
            }
        }
    }

    fs::path add(const std::string& name)
    {
        written_.push_back(dir_ / name);
        return written_.back();
    }
    void text(const std::string& name, const std::string& content)
    {
        std::ofstream out(add(name), std::ios::binary | std::ios::trunc);
        out << content;
        if (!out) {
            throw IoError("cannot write " + (dir_ / name).string());
        }
    }
    void write_json(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }
    void commit() { committed_ = true; }

private:
    fs::path dir_;
    std::vector<fs::path> written_;
    bool committed_ = false;
};

json read_json(const fs::path& dir, const std::string& name, const char* producer)
{
    const auto path = dir / name;
    std::ifstream in(path);
    if (!in) {
        throw DependencyError(name + " not found in " + dir.string() + "; run `wavestack " + producer + "` first");
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

FeatureFrame read_frame(const fs::path& dir, const std::string& name, const char* producer, const RunConfig& cfg)
{
    const auto path = dir / name;
    if (!fs::exists(path)) {
        throw DependencyError(name + " not found in " + dir.string() + "; run `wavestack " + producer + "` first");
    }
    return load_csv(path, {}, cfg.target);
}

// ---------------------------------------------------------------------------
// Frames

struct Split {
    std::size_t raw_rows = 0;
    std::size_t warmup = 0;
    std::size_t rows = 0;        // rows of the feature frame
    std::size_t train_rows = 0;  // leading feature rows used for fitting
};

Split read_split(const fs::path& dir)
{
    const auto j = read_json(dir, "split.json", "features");
    return {j.at("raw_rows").get<std::size_t>(), j.at("warmup").get<std::size_t>(), j.at("rows").get<std::size_t>(),
            j.at("train_rows").get<std::size_t>()};
}

FeatureFrame concat_rows(const FeatureFrame& a, const FeatureFrame& b)
{
    std::vector<Date> dates = a.dates();
    dates.insert(dates.end(), b.dates().begin(), b.dates().end());
    FeatureFrame out(std::move(dates), a.target());
    for (std::size_t c = 0; c < a.cols(); ++c) {
        auto col = a.column(c);
        const auto& tail = b.column(a.names()[c]);
        col.insert(col.end(), tail.begin(), tail.end());
        out.add_column(a.names()[c], std::move(col));
    }
    return out;
}

/// Fills test-partition gaps from the most recent value, reaching back into
/// the cleaned training rows when needed.
FeatureFrame fill_forward(const FeatureFrame& test, const FeatureFrame& history)
{
    FeatureFrame out(test.dates(), test.target());
    for (std::size_t c = 0; c < test.cols(); ++c) {
        auto col = test.column(c);
        double last = history.column(test.names()[c]).back();
        for (double& x : col) {
            if (is_missing(x)) {
                x = last;
            }
            last = x;
        }
        out.add_column(test.names()[c], std::move(col));
    }
    return out;
}

std::vector<std::string> candidates(const FeatureFrame& frame)
{
    std::vector<std::string> out;
    for (const auto& name : frame.names()) {
        if (name != frame.target()) {
            out.push_back(name);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Design matrices

struct Design {
    std::vector<std::string> inputs;
    std::vector<double> mean;
    std::vector<double> scale;
    Matrix x;  // rows x inputs, standardised
};

Design build_design(const FeatureFrame& frame, std::vector<std::string> inputs, std::size_t train_rows)
{
    Design d;
    d.inputs = std::move(inputs);
    d.x = Matrix(frame.rows(), d.inputs.size());
    for (std::size_t c = 0; c < d.inputs.size(); ++c) {
        const auto& col = frame.column(d.inputs[c]);
        double mean = 0.0;
        for (std::size_t r = 0; r < train_rows; ++r) {
            mean += col[r];
        }
        mean /= static_cast<double>(train_rows);
        double var = 0.0;
        for (std::size_t r = 0; r < train_rows; ++r) {
            var += (col[r] - mean) * (col[r] - mean);
        }
        double sd = std::sqrt(var / static_cast<double>(train_rows));
        if (!(sd > 1e-12)) {
            sd = 1.0;
        }
        d.mean.push_back(mean);
        d.scale.push_back(sd);
    }
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        for (std::size_t c = 0; c < d.inputs.size(); ++c) {
            d.x(r, c) = (frame.column(d.inputs[c])[r] - d.mean[c]) / d.scale[c];
        }
    }
    return d;
}

Design design_from_metadata(const FeatureFrame& frame, const json& meta)
{
    Design d;
    d.inputs = meta.at("inputs").get<std::vector<std::string>>();
    d.mean = meta.at("scaler").at("mean").get<std::vector<double>>();
    d.scale = meta.at("scaler").at("scale").get<std::vector<double>>();
    d.x = Matrix(frame.rows(), d.inputs.size());
    for (std::size_t c = 0; c < d.inputs.size(); ++c) {
        if (!frame.has_column(d.inputs[c])) {
            throw DependencyError("features.csv lacks trained input '" + d.inputs[c] + "'; rerun `wavestack train`");
        }
        const auto& col = frame.column(d.inputs[c]);
        for (std::size_t r = 0; r < frame.rows(); ++r) {
            d.x(r, c) = (col[r] - d.mean[c]) / d.scale[c];
        }
    }
    return d;
}

Matrix window_at(const Matrix& x, std::size_t t, std::size_t lookback)
{
    Matrix w(lookback, x.cols());
    for (std::size_t i = 0; i < lookback; ++i) {
        const auto src = x.row(t + 1 - lookback + i);
        std::copy(src.begin(), src.end(), w.row(i).begin());
    }
    return w;
}

/// Sample origins t whose window and target both fall in [first, end).
std::vector<std::size_t> origins(std::size_t first, std::size_t end, std::size_t lookback, std::size_t horizon)
{
    std::vector<std::size_t> out;
    for (std::size_t t = std::max(first, lookback - 1); t + horizon < end; ++t) {
        out.push_back(t);
    }
    return out;
}

std::size_t majority_class(std::span<const int> labels)
{
    const auto ones = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    return 2 * ones > labels.size() ? 1 : 0;
}

template <class F>
auto in_stage(const char* name, F&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const Error& e) {
        throw_error(e.kind(), std::string("stage ") + name + ": " + e.detail());
    }
}

json regression_metrics(std::span<const double> actual, std::span<const double> pred, std::vector<std::string>& warnings)
{
    json m{{"mae", metrics::mae(actual, pred)}, {"rmse", metrics::rmse(actual, pred)}};
    try {
        m["mape"] = metrics::mape(actual, pred);
    } catch (const DomainError& e) {
        m["mape"] = nullptr;
        warnings.push_back(e.detail());
    }
    return m;
}

json classification_metrics(std::span<const int> actual, std::span<const int> pred,
                            std::optional<std::span<const double>> score, std::vector<std::string>& warnings)
{
    const auto c = metrics::confusion(actual, pred);
    json m{
        {"accuracy", metrics::accuracy(c, &warnings)},
        {"precision", metrics::precision(c, &warnings)},
        {"recall", metrics::recall(c, &warnings)},
        {"f1", metrics::f1(c, &warnings)},
        {"specificity", metrics::specificity(c, &warnings)},
        {"confusion", {{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}}},
    };
    if (score) {
        try {
            m["auc"] = metrics::roc_auc(actual, *score);
        } catch (const DomainError& e) {
            m["auc"] = nullptr;
            warnings.push_back(e.detail());
        }
    }
    return m;
}

fs::path ensemble_dir(const fs::path& dir, Task task, std::size_t h)
{
    return dir / ("ensemble_" + artifact_stem(task, h));
}

Ensemble load_ensemble(const fs::path& dir, Task task, std::size_t h)
{
    const auto path = ensemble_dir(dir, task, h);
    if (!fs::exists(path / "ensemble.json")) {
        throw DependencyError("no trained " + std::string(to_string(task)) + " ensemble for horizon " +
                              std::to_string(h) + " in " + dir.string() + "; run `wavestack train` first");
    }
    auto e = Ensemble::load(path);
    const auto& meta = e.metadata();
    if (meta.value("horizon", std::size_t{0}) != h || meta.value("task", "") != to_string(task)) {
        throw DependencyError("ensemble in " + path.string() + " was trained for " + meta.value("task", "?") +
                              " horizon " + std::to_string(meta.value("horizon", std::size_t{0})) +
                              ", not horizon " + std::to_string(h) + "; rerun `wavestack train`");
    }
    return e;
}

std::vector<std::size_t> horizons_for(const RunConfig& cfg, std::optional<std::size_t> horizon)
{
    if (!horizon) {
        return cfg.horizons;
    }
    if (std::find(cfg.horizons.begin(), cfg.horizons.end(), *horizon) == cfg.horizons.end()) {
        throw DependencyError("horizon " + std::to_string(*horizon) +
                              " was not trained by this config; rerun `wavestack train` with it in `horizons`");
    }
    return {*horizon};
}

}  // namespace

std::string artifact_stem(Task task, std::size_t horizon)
{
    return std::string(to_string(task)) + "_h" + std::to_string(horizon);
}

// ---------------------------------------------------------------------------
// features

void stage_features(const RunConfig& cfg, const fs::path& dir)
{
    if (!fs::exists(cfg.data)) {
        throw IoError("data file " + cfg.data.string() + " does not exist");
    }
    FeatureFrame raw = load_csv(cfg.data, cfg.columns, cfg.target);
    if (cfg.interval) {
        raw = restrict_to_interval(raw, *cfg.interval);
    }
    const std::size_t n = raw.rows();

    std::vector<indicators::IndicatorSpec> specs;
    if (cfg.indicators) {
        specs = *cfg.indicators;
    } else {
        specs = indicators::default_grid(raw.names());
    }
    for (const auto& s : specs) {
        if (!raw.has_column(s.source)) {
            throw SchemaError("indicator " + s.column_name() + " references absent column '" + s.source + "'");
        }
    }
    const std::size_t warmup = indicators::warmup(specs);
    if (warmup + 2 > n) {
        throw SizeError(std::to_string(n) + " rows cannot cover an indicator warm-up of " + std::to_string(warmup));
    }
    const std::size_t rows = n - warmup;
    const std::size_t train = train_rows(rows, cfg.train_fraction);
    if (train == 0 || train >= rows) {
        throw SizeError("train fraction " + fmt(cfg.train_fraction) + " leaves an empty partition of " +
                        std::to_string(rows) + " rows");
    }
    const std::size_t boundary = warmup + train;

    // Training rows are cleaned on their own; test rows only ever look back.
    FeatureFrame train_part = interpolate_missing(raw.slice_rows(0, boundary));
    FeatureFrame test_part = fill_forward(raw.slice_rows(boundary, n), train_part);

    json outliers{{"enabled", cfg.outliers.enabled}, {"train", json::array()}, {"test", json::array()}};
    if (cfg.outliers.enabled) {
        IsolationForestConfig ifc;
        ifc.trees = cfg.outliers.trees;
        ifc.subsample = cfg.outliers.subsample;
        ifc.contamination = cfg.outliers.contamination;
        ifc.seed = derive_seed(cfg.seed, 7);
        if (ifc.subsample && *ifc.subsample > boundary) {
            throw ConfigError("outliers.subsample " + std::to_string(*ifc.subsample) + " exceeds the " +
                              std::to_string(boundary) + " training rows");
        }

        const auto train_rows_before = frame_rows(train_part);
        IsolationForest forest;
        forest.fit(train_rows_before, ifc);
        auto filtered = isolation_forest_filter(train_part, ifc);
        double cutoff = std::numeric_limits<double>::infinity();
        for (std::size_t r : filtered.flagged) {
            cutoff = std::min(cutoff, forest.score(train_rows_before[r]));
            outliers["train"].push_back(train_part.dates()[r].to_string());
        }
        train_part = std::move(filtered.frame);

        // Test rows scoring at or above the weakest flagged training row are
        // replaced by the previous cleaned row.
        FeatureFrame cleaned(test_part.dates(), test_part.target());
        std::vector<std::vector<double>> cols;
        for (std::size_t c = 0; c < test_part.cols(); ++c) {
            cols.push_back(test_part.column(c));
        }
        const auto test_rows = frame_rows(test_part);
        for (std::size_t r = 0; r < test_rows.size(); ++r) {
            if (forest.score(test_rows[r]) >= cutoff) {
                outliers["test"].push_back(test_part.dates()[r].to_string());
                for (std::size_t c = 0; c < cols.size(); ++c) {
                    cols[c][r] = r == 0 ? train_part.column(c).back() : cols[c][r - 1];
                }
            }
        }
        for (std::size_t c = 0; c < cols.size(); ++c) {
            cleaned.add_column(test_part.names()[c], std::move(cols[c]));
        }
        test_part = std::move(cleaned);
        outliers["threshold"] = std::isfinite(cutoff) ? json(cutoff) : json(nullptr);
    }

    const FeatureFrame features = indicators::expand(concat_rows(train_part, test_part), specs);

    Outputs out(dir);
    write_csv(out.add("features_raw.csv"), features);
    out.write_json("outliers.json", outliers);
    out.write_json("split.json", json{
                                     {"interval", cfg.interval_name},
                                     {"raw_rows", n},
                                     {"warmup", warmup},
                                     {"rows", rows},
                                     {"train_rows", train},
                                     {"train_fraction", cfg.train_fraction},
                                     {"first_date", features.dates().front().to_string()},
                                     {"last_train_date", features.dates()[train - 1].to_string()},
                                     {"first_test_date", features.dates()[train].to_string()},
                                     {"last_date", features.dates().back().to_string()},
                                 });
    out.commit();
}

// ---------------------------------------------------------------------------
// denoise

void stage_denoise(const RunConfig& cfg, const fs::path& dir)
{
    const Split split = read_split(dir);
    const FeatureFrame raw = read_frame(dir, "features_raw.csv", "features", cfg);
    if (raw.rows() != split.rows) {
        throw StructureError("features_raw.csv has " + std::to_string(raw.rows()) + " rows, split.json says " +
                             std::to_string(split.rows));
    }

    FeatureFrame denoised(raw.dates(), raw.target());
    json thresholds = json::object();
    for (std::size_t c = 0; c < raw.cols(); ++c) {
        const auto& name = raw.names()[c];
        const bool is_target = name == raw.target();
        const bool apply = cfg.denoise.enabled && (cfg.denoise.apply_to == DenoiseTarget::both ||
                                                   (cfg.denoise.apply_to == DenoiseTarget::target) == is_target);
        if (!apply) {
            denoised.add_column(name, raw.column(c));
            continue;
        }
        const auto& col = raw.column(c);
        const auto fitted = FittedDenoiser::fit(std::span(col).first(split.train_rows), cfg.denoise.config,
                                                cfg.denoise.window);
        thresholds[name] = fitted.threshold;
        denoised.add_column(name, fitted.apply_causal(col));
    }

    std::ostringstream before_after;
    before_after << "date,raw,denoised\n";
    const auto& r = raw.target_values();
    const auto& d = denoised.target_values();
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        before_after << raw.dates()[i].to_string() << ',' << fmt(r[i]) << ',' << fmt(d[i]) << '\n';
    }

    Outputs out(dir);
    write_csv(out.add("features.csv"), denoised);
    out.text("denoise.csv", before_after.str());
    out.write_json("denoise.json", json{{"enabled", cfg.denoise.enabled},
                                        {"apply_to", to_string(cfg.denoise.apply_to)},
                                        {"mode", cfg.denoise.config.mode == ThresholdMode::soft ? "soft" : "hard"},
                                        {"window", cfg.denoise.window},
                                        {"thresholds", thresholds}});
    out.commit();
}

// ---------------------------------------------------------------------------
// select

void stage_select(const RunConfig& cfg, const fs::path& dir)
{
    const Split split = read_split(dir);
    const FeatureFrame raw = read_frame(dir, "features_raw.csv", "features", cfg);
    const FeatureFrame frame = read_frame(dir, "features.csv", "denoise", cfg);
    const auto names = candidates(frame);
    if (names.empty()) {
        throw ConfigError("no feature columns besides the target to select from");
    }
    const auto& price = raw.target_values();
    const std::span<const double> train_price(price.data(), split.train_rows);

    Outputs out(dir);
    for (const Task task : cfg.tasks) {
        for (const std::size_t h : cfg.horizons) {
            if (split.train_rows <= h + 1) {
                throw SizeError("training partition of " + std::to_string(split.train_rows) +
                                " rows is too short for horizon " + std::to_string(h));
            }
            const std::size_t samples = split.train_rows - h;
            featsel::FeatureMatrix fm;
            fm.names = names;
            for (const auto& name : names) {
                const auto& col = frame.column(name);
                fm.columns.emplace_back(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(samples));
            }
            const auto labels = make_labels(train_price, h);
            std::vector<double> targets(samples);
            for (std::size_t t = 0; t < samples; ++t) {
                targets[t] = task == Task::classification ? static_cast<double>(labels[t])
                                                          : train_price[t + h] - train_price[t];
            }

            featsel::ForestConfig forest;
            forest.trees = cfg.selector.trees;
            forest.max_depth = cfg.selector.max_depth;
            forest.min_leaf = cfg.selector.min_leaf;
            forest.seed = derive_seed(derive_seed(cfg.seed, 23), (task == Task::regression ? 0 : 1000) + h);
            forest.task = task == Task::classification ? featsel::TreeTask::classification
                                                       : featsel::TreeTask::regression;
            forest.threads = cfg.threads;

            const std::size_t k = std::min(cfg.selector.k, names.size());
            featsel::SelectionResult result;
            switch (cfg.selector.method) {
            case featsel::Method::chi2:
                result = featsel::select_chi2(fm, labels, k, cfg.selector.bins);
                break;
            case featsel::Method::rfe:
                result = featsel::rfe(fm, targets, k, cfg.selector.rfe_step, forest);
                break;
            case featsel::Method::embedded:
                result = featsel::embedded_select(fm, targets, k, cfg.selector.corr_cap, forest);
                break;
            }
            for (const auto& w : result.warnings) {
                warn(artifact_stem(task, h) + ": " + w);
            }
            out.write_json("selection_" + artifact_stem(task, h) + ".json",
                           json{{"method", featsel::to_string(result.method)},
                                {"task", to_string(task)},
                                {"horizon", h},
                                {"k", result.k},
                                {"selected", result.selected},
                                {"scores", result.scores},
                                {"warnings", result.warnings}});
        }
    }
    out.commit();
}

// ---------------------------------------------------------------------------
// train

void stage_train(const RunConfig& cfg, const fs::path& dir)
{
    const Split split = read_split(dir);
    const FeatureFrame raw = read_frame(dir, "features_raw.csv", "features", cfg);
    const FeatureFrame frame = read_frame(dir, "features.csv", "denoise", cfg);
    const auto& price = raw.target_values();
    const auto& anchor = frame.target_values();
    const std::size_t lookback = cfg.lookback;

    Outputs out(dir);
    std::ostringstream history;
    history << "task,horizon,member,kind,epoch,loss\n";
    for (const Task task : cfg.tasks) {
        for (const std::size_t h : cfg.horizons) {
            const auto sel = read_json(dir, "selection_" + artifact_stem(task, h) + ".json", "select");
            std::vector<std::string> inputs{frame.target()};
            for (const auto& name : sel.at("selected").get<std::vector<std::string>>()) {
                inputs.push_back(name);
            }
            const Design design = build_design(frame, inputs, split.train_rows);

            const auto train_t = origins(0, split.train_rows, lookback, h);
            if (train_t.empty()) {
                throw SizeError("no training windows: " + std::to_string(split.train_rows) +
                                " training rows, lookback " + std::to_string(lookback) + ", horizon " +
                                std::to_string(h));
            }
            Dataset data;
            for (std::size_t t : train_t) {
                data.windows.push_back(window_at(design.x, t, lookback));
                data.targets.push_back(task == Task::classification ? (price[t + h] > price[t] ? 1.0 : 0.0)
                                                                    : price[t + h] - anchor[t]);
            }
            double target_mean = 0.0;
            double target_scale = 1.0;
            if (task == Task::regression) {
                target_mean = std::accumulate(data.targets.begin(), data.targets.end(), 0.0) /
                              static_cast<double>(data.size());
                double var = 0.0;
                for (double y : data.targets) {
                    var += (y - target_mean) * (y - target_mean);
                }
                target_scale = std::sqrt(var / static_cast<double>(data.size()));
                if (!(target_scale > 1e-12)) {
                    target_scale = 1.0;
                }
                for (double& y : data.targets) {
                    y = (y - target_mean) / target_scale;
                }
            }

            const auto specs = cfg.members(task);
            Ensemble ensemble = fit_ensemble(data, specs, cfg.train, cfg.threads);
            ensemble.metadata() = json{
                {"task", to_string(task)},
                {"horizon", h},
                {"lookback", lookback},
                {"inputs", design.inputs},
                {"scaler", {{"mean", design.mean}, {"scale", design.scale}}},
                {"target", {{"mean", target_mean}, {"scale", target_scale}, {"anchor", frame.target()}}},
                {"train_rows", split.train_rows},
                {"train_samples", data.size()},
                {"config_hash", cfg.hash()},
            };
            const auto edir = out.add("ensemble_" + artifact_stem(task, h));
            ensemble.save(edir);

            for (std::size_t i = 0; i < ensemble.size(); ++i) {
                const auto& losses = ensemble.member(i).loss_history();
                for (std::size_t e = 0; e < losses.size(); ++e) {
                    history << to_string(task) << ',' << h << ',' << i << ','
                            << to_string(ensemble.member(i).spec().kind) << ',' << e + 1 << ',' << fmt(losses[e])
                            << '\n';
                }
            }
        }
    }
    out.text("loss_history.csv", history.str());
    out.commit();
}

// ---------------------------------------------------------------------------
// evaluate

json stage_evaluate(const RunConfig& cfg, const fs::path& dir, std::optional<std::size_t> horizon)
{
    const Split split = read_split(dir);
    const FeatureFrame raw = read_frame(dir, "features_raw.csv", "features", cfg);
    const FeatureFrame frame = read_frame(dir, "features.csv", "denoise", cfg);
    const auto& price = raw.target_values();
    const auto& anchor = frame.target_values();
    const auto horizons = horizons_for(cfg, horizon);

    Outputs out(dir);
    json reports = json::array();
    for (const Task task : cfg.tasks) {
        for (const std::size_t h : horizons) {
            const Ensemble ensemble = load_ensemble(dir, task, h);
            const auto& meta = ensemble.metadata();
            const std::size_t lookback = meta.at("lookback").get<std::size_t>();
            const Design design = design_from_metadata(frame, meta);
            const auto test_t = origins(split.train_rows, split.rows, lookback, h);
            if (test_t.empty()) {
                throw SizeError("test partition has no complete horizon-" + std::to_string(h) + " samples");
            }
            std::vector<Matrix> windows;
            for (std::size_t t : test_t) {
                windows.push_back(window_at(design.x, t, lookback));
            }
            EnsembleOutput pred = ensemble.predict(windows);

            std::vector<std::string> warnings;
            json report{
                {"interval", cfg.interval_name},
                {"horizon", h},
                {"task", to_string(task)},
                {"predictions", "predictions_" + artifact_stem(task, h) + ".csv"},
                {"samples", {{"train", meta.at("train_samples")}, {"test", test_t.size()}}},
            };
            json members = json::array();
            for (std::size_t i = 0; i < ensemble.size(); ++i) {
                members.push_back({{"name", "member_" + std::to_string(i)},
                                   {"kind", to_string(ensemble.member(i).spec().kind)},
                                   {"seed", ensemble.member(i).spec().seed}});
            }
            report["members"] = members;

            std::ostringstream csv;
            csv << "date,actual";
            for (std::size_t i = 0; i < ensemble.size(); ++i) {
                csv << ",member_" << i;
            }
            csv << ",combined" << (task == Task::classification ? ",score" : "") << '\n';

            json member_metrics = json::object();
            if (task == Task::regression) {
                const double mean = meta.at("target").at("mean").get<double>();
                const double scale = meta.at("target").at("scale").get<double>();
                std::vector<double> actual, persistence;
                for (std::size_t t : test_t) {
                    actual.push_back(price[t + h]);
                    persistence.push_back(price[t]);
                }
                for (auto& member : pred.members) {
                    for (std::size_t s = 0; s < member.size(); ++s) {
                        member[s] = anchor[test_t[s]] + mean + scale * member[s];
                    }
                }
                pred.combined = combine_regression(pred.members);
                report["metrics"] = regression_metrics(actual, pred.combined, warnings);
                for (std::size_t i = 0; i < pred.members.size(); ++i) {
                    member_metrics["member_" + std::to_string(i)] =
                        regression_metrics(actual, pred.members[i], warnings);
                }
                report["baselines"] = {{"persistence", regression_metrics(actual, persistence, warnings)}};
                for (std::size_t s = 0; s < test_t.size(); ++s) {
                    csv << frame.dates()[test_t[s] + h].to_string() << ',' << fmt(actual[s]);
                    for (const auto& member : pred.members) {
                        csv << ',' << fmt(member[s]);
                    }
                    csv << ',' << fmt(pred.combined[s]) << '\n';
                }
            } else {
                std::vector<int> actual, combined;
                for (std::size_t t : test_t) {
                    actual.push_back(price[t + h] > price[t] ? 1 : 0);
                }
                for (double c : pred.combined) {
                    combined.push_back(static_cast<int>(c));
                }
                report["metrics"] = classification_metrics(actual, combined, std::span<const double>(pred.score),
                                                           warnings);
                for (std::size_t i = 0; i < pred.members.size(); ++i) {
                    std::vector<int> votes;
                    for (double p : pred.members[i]) {
                        votes.push_back(p > ensemble.threshold() ? 1 : 0);
                    }
                    member_metrics["member_" + std::to_string(i)] =
                        classification_metrics(actual, votes, std::span<const double>(pred.members[i]), warnings);
                }
                // Majority baseline: the most frequent training label, held fixed over the test rows.
                std::vector<int> train_labels;
                for (std::size_t t : origins(0, split.train_rows, lookback, h)) {
                    train_labels.push_back(price[t + h] > price[t] ? 1 : 0);
                }
                const auto majority = static_cast<int>(majority_class(train_labels));
                const auto test_ones = static_cast<double>(std::count(actual.begin(), actual.end(), 1));
                const double test_rate =
                    std::max(test_ones, static_cast<double>(actual.size()) - test_ones) /
                    static_cast<double>(actual.size());
                const double majority_accuracy =
                    static_cast<double>(std::count(actual.begin(), actual.end(), majority)) /
                    static_cast<double>(actual.size());
                report["baselines"] = {
                    {"majority", {{"class", majority}, {"accuracy", majority_accuracy}}},
                    {"test_majority_rate", test_rate},
                };
                for (std::size_t s = 0; s < test_t.size(); ++s) {
                    csv << frame.dates()[test_t[s] + h].to_string() << ',' << actual[s];
                    for (const auto& member : pred.members) {
                        csv << ',' << fmt(member[s]);
                    }
                    csv << ',' << combined[s] << ',' << fmt(pred.score[s]) << '\n';
                }
            }
            report["member_metrics"] = member_metrics;
            report["warnings"] = warnings;
            for (const auto& w : warnings) {
                warn(artifact_stem(task, h) + ": " + w);
            }
            out.text(report.at("predictions").get<std::string>(), csv.str());
            reports.push_back(report);
        }
    }
    out.write_json("report.json", reports);
    out.commit();
    return reports;
}

// ---------------------------------------------------------------------------
// predict

std::vector<Forecast> stage_predict(const RunConfig& cfg, const fs::path& dir, std::optional<std::size_t> horizon)
{
    const FeatureFrame frame = read_frame(dir, "features.csv", "denoise", cfg);
    const auto& anchor = frame.target_values();
    const auto horizons = horizons_for(cfg, horizon);

    Outputs out(dir);
    std::vector<Forecast> forecasts;
    for (const Task task : cfg.tasks) {
        for (const std::size_t h : horizons) {
            const Ensemble ensemble = load_ensemble(dir, task, h);
            const auto& meta = ensemble.metadata();
            const std::size_t lookback = meta.at("lookback").get<std::size_t>();
            if (frame.rows() < lookback) {
                throw SizeError("features.csv has fewer rows than the lookback window");
            }
            const Design design = design_from_metadata(frame, meta);
            const std::size_t last = frame.rows() - 1;
            const std::vector<Matrix> windows{window_at(design.x, last, lookback)};
            EnsembleOutput pred = ensemble.predict(windows);

            Forecast f;
            f.task = task;
            f.horizon = h;
            f.origin = frame.dates()[last];
            for (std::size_t i = 0; i < ensemble.size(); ++i) {
                f.kinds.emplace_back(to_string(ensemble.member(i).spec().kind));
                f.members.push_back(pred.members[i][0]);
            }
            if (task == Task::regression) {
                const double mean = meta.at("target").at("mean").get<double>();
                const double scale = meta.at("target").at("scale").get<double>();
                for (double& m : f.members) {
                    m = anchor[last] + mean + scale * m;
                }
                std::vector<std::vector<double>> cols;
                for (double m : f.members) {
                    cols.push_back({m});
                }
                f.combined = combine_regression(cols)[0];
            } else {
                f.combined = pred.combined[0];
                f.score = pred.score[0];
            }
            json j{{"task", to_string(task)},       {"horizon", h},         {"origin", f.origin.to_string()},
                   {"target_date", (f.origin + static_cast<std::int32_t>(h)).to_string()},
                   {"members", f.members},          {"kinds", f.kinds},     {"combined", f.combined}};
            if (f.score) {
                j["score"] = *f.score;
            }
            out.write_json("forecast_" + artifact_stem(task, h) + ".json", j);
            forecasts.push_back(std::move(f));
        }
    }
    out.commit();
    return forecasts;
}

// ---------------------------------------------------------------------------
// report

void stage_report(const fs::path& run_dir)
{
    if (!fs::is_directory(run_dir)) {
        throw DependencyError("run directory " + run_dir.string() + " does not exist; run `wavestack run` first");
    }
    const json reports = read_json(run_dir, "report.json", "evaluate");

    Outputs out(run_dir);
    std::ostringstream tidy;
    tidy << "interval,task,horizon,model,metric,value\n";
    std::map<std::string, std::ostringstream> per_metric;
    auto emit = [&](const json& r, const std::string& model, const json& metrics) {
        for (const auto& [name, value] : metrics.items()) {
            if (!value.is_number()) {
                continue;
            }
            tidy << r.at("interval").get<std::string>() << ',' << r.at("task").get<std::string>() << ','
                 << r.at("horizon").get<std::size_t>() << ',' << model << ',' << name << ','
                 << fmt(value.get<double>()) << '\n';
            if (model == "combined") {
                auto& s = per_metric[name];
                if (s.tellp() == 0) {
                    s << "interval,task,horizon,value\n";
                }
                s << r.at("interval").get<std::string>() << ',' << r.at("task").get<std::string>() << ','
                  << r.at("horizon").get<std::size_t>() << ',' << fmt(value.get<double>()) << '\n';
            }
        }
    };

    for (const auto& r : reports) {
        emit(r, "combined", r.at("metrics"));
        for (const auto& [name, m] : r.at("member_metrics").items()) {
            emit(r, name, m);
        }
        const auto& baselines = r.at("baselines");
        if (baselines.contains("persistence")) {
            emit(r, "persistence", baselines.at("persistence"));
        }
        if (baselines.contains("majority")) {
            emit(r, "majority", json{{"accuracy", baselines.at("majority").at("accuracy")}});
        }

        const auto stem = r.at("task").get<std::string>() + "_h" + std::to_string(r.at("horizon").get<std::size_t>());
        const auto pred_path = run_dir / r.at("predictions").get<std::string>();
        const FeatureFrame pred = [&] {
            if (!fs::exists(pred_path)) {
                throw DependencyError(pred_path.filename().string() + " not found; run `wavestack evaluate` first");
            }
            return load_csv(pred_path, {}, "actual");
        }();
        const auto& actual = pred.column("actual");
        const auto& combined = pred.column("combined");

        std::ostringstream series;
        series << "date,actual,predicted\n";
        for (std::size_t i = 0; i < pred.rows(); ++i) {
            series << pred.dates()[i].to_string() << ',' << fmt(actual[i]) << ',' << fmt(combined[i]) << '\n';
        }
        out.text("series_" + stem + ".csv", series.str());

        if (pred.has_column("score")) {
            std::vector<int> labels;
            for (double a : actual) {
                labels.push_back(static_cast<int>(a));
            }
            const auto& score = pred.column("score");
            std::ostringstream roc;
            roc << "threshold,fpr,tpr\n";
            const bool both = std::count(labels.begin(), labels.end(), 1) > 0 &&
                              std::count(labels.begin(), labels.end(), 0) > 0;
            if (both) {
                for (const auto& p : metrics::roc_curve(labels, score)) {
                    roc << (std::isinf(p.threshold) ? std::string("inf") : fmt(p.threshold)) << ',' << fmt(p.fpr)
                        << ',' << fmt(p.tpr) << '\n';
                }
            }
            out.text("roc_" + stem + ".csv", roc.str());
        }
    }
    out.text("metrics.csv", tidy.str());
    for (auto& [name, s] : per_metric) {
        out.text("metric_" + name + ".csv", s.str());
    }
    out.commit();
}

// ---------------------------------------------------------------------------
// run

fs::path run(const RunConfig& cfg)
{
    const fs::path final_dir = cfg.run_dir();
    fs::path partial = final_dir;
    partial += ".partial";
    fs::remove_all(partial);
    fs::create_directories(partial);
    try {
        {
            std::ofstream c(partial / "config.json");
            c << cfg.canonical.dump(2) << '\n';
        }
        in_stage("features", [&] { stage_features(cfg, partial); });
        in_stage("denoise", [&] { stage_denoise(cfg, partial); });
        in_stage("select", [&] { stage_select(cfg, partial); });
        in_stage("train", [&] { stage_train(cfg, partial); });
        in_stage("evaluate", [&] { return stage_evaluate(cfg, partial); });
        in_stage("report", [&] { stage_report(partial); });

        const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm utc{};
        gmtime_r(&now, &utc);
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
        std::ofstream m(partial / "manifest.json");
        m << json{{"tool", "wavestack"},
                  {"config_hash", cfg.hash()},
                  {"seed", cfg.seed},
                  {"created", stamp},
                  {"data", cfg.data.string()}}
                 .dump(2)
          << '\n';
    } catch (...) {
        std::error_code ec;
        fs::remove_all(partial, ec);
        throw;
    }
    fs::remove_all(final_dir);
    fs::rename(partial, final_dir);
    return final_dir;
}

}  // namespace wavestack::pipeline
