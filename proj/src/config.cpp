#include "wavestack/config.hpp"

#include "wavestack/error.hpp"
#include "wavestack/stack.hpp"
#include "wavestack/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>

namespace wavestack {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where)
{
    if (!obj.is_object()) {
        throw ConfigError(where + " must be a JSON object");
    }
    for (const auto& [key, value] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

template <class T>
T read(const json& obj, const char* key, const std::string& where, T fallback)
{
    if (!obj.contains(key) || obj.at(key).is_null()) {
        return fallback;
    }
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

std::size_t read_count(const json& obj, const char* key, const std::string& where, std::size_t fallback,
                       std::size_t minimum)
{
    if (!obj.contains(key) || obj.at(key).is_null()) {
        return fallback;
    }
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < static_cast<std::int64_t>(minimum)) {
        throw ConfigError(where + "." + key + " must be an integer >= " + std::to_string(minimum));
    }
    return v.get<std::size_t>();
}

double read_number(const json& obj, const char* key, const std::string& where, double fallback)
{
    if (!obj.contains(key) || obj.at(key).is_null()) {
        return fallback;
    }
    if (!obj.at(key).is_number()) {
        throw ConfigError(where + "." + key + " must be a number");
    }
    return obj.at(key).get<double>();
}

Date read_date(const json& obj, const char* key, const std::string& where)
{
    if (!obj.contains(key) || !obj.at(key).is_string()) {
        throw ConfigError(where + "." + key + " must be a YYYY-MM-DD string");
    }
    try {
        return Date::parse(obj.at(key).get<std::string>());
    } catch (const Error& e) {
        throw ConfigError(where + "." + key + ": " + e.detail());
    }
}

void parse_interval(const json& j, RunConfig& cfg)
{
    if (!j.contains("interval") || j.at("interval").is_null()) {
        return;
    }
    const auto& v = j.at("interval");
    if (v.is_string()) {
        const auto name = v.get<std::string>();
        if (name == "full") {
            return;
        }
        auto named = named_interval(name);
        if (!named) {
            throw ConfigError("unknown interval '" + name + "' (expected full, I, II, III or {begin, end})");
        }
        cfg.interval_name = name;
        cfg.interval = named;
        return;
    }
    check_keys(v, {"begin", "end", "name"}, "interval");
    DateInterval custom{read<std::string>(v, "name", "interval", "custom"), read_date(v, "begin", "interval"),
                        read_date(v, "end", "interval")};
    if (custom.end < custom.begin) {
        throw ConfigError("interval ends before it begins");
    }
    cfg.interval_name = custom.name;
    cfg.interval = custom;
}

void parse_outliers(const json& j, OutlierSettings& s)
{
    if (!j.contains("outliers")) {
        return;
    }
    const auto& v = j.at("outliers");
    check_keys(v, {"enabled", "trees", "subsample", "contamination"}, "outliers");
    s.enabled = read<bool>(v, "enabled", "outliers", s.enabled);
    s.trees = read_count(v, "trees", "outliers", s.trees, 1);
    if (v.contains("subsample") && !v.at("subsample").is_null()) {
        s.subsample = read_count(v, "subsample", "outliers", 256, 2);
    }
    s.contamination = read_number(v, "contamination", "outliers", s.contamination);
    if (!(s.contamination >= 0.0 && s.contamination < 0.5)) {
        throw ConfigError("outliers.contamination must be in [0, 0.5)");
    }
}

void parse_denoise(const json& j, DenoiseSettings& s)
{
    if (!j.contains("denoise")) {
        return;
    }
    const auto& v = j.at("denoise");
    check_keys(v, {"enabled", "levels", "mode", "apply_to", "window"}, "denoise");
    s.enabled = read<bool>(v, "enabled", "denoise", s.enabled);
    if (v.contains("levels") && !(v.at("levels").is_string() && v.at("levels").get<std::string>() == "auto")) {
        s.config.levels = read_count(v, "levels", "denoise", 1, 1);
    }
    const auto mode = read<std::string>(v, "mode", "denoise", "soft");
    if (mode == "soft") {
        s.config.mode = ThresholdMode::soft;
    } else if (mode == "hard") {
        s.config.mode = ThresholdMode::hard;
    } else {
        throw ConfigError("denoise.mode must be soft or hard, not '" + mode + "'");
    }
    const auto target = read<std::string>(v, "apply_to", "denoise", "both");
    if (target == "both") {
        s.apply_to = DenoiseTarget::both;
    } else if (target == "features") {
        s.apply_to = DenoiseTarget::features;
    } else if (target == "target") {
        s.apply_to = DenoiseTarget::target;
    } else {
        throw ConfigError("denoise.apply_to must be features, target or both, not '" + target + "'");
    }
    s.window = read_count(v, "window", "denoise", s.window, 4);
    if (s.config.levels && *s.config.levels > max_dwt_levels(s.window)) {
        throw ConfigError("denoise.levels exceeds floor(log2(window))");
    }
}

void parse_indicators(const json& j, RunConfig& cfg)
{
    if (!j.contains("indicators")) {
        return;
    }
    const auto& v = j.at("indicators");
    if (v.is_string()) {
        if (v.get<std::string>() != "default") {
            throw ConfigError("indicators must be \"default\" or a list of {kind, window, source}");
        }
        return;
    }
    if (!v.is_array()) {
        throw ConfigError("indicators must be \"default\" or a list of {kind, window, source}");
    }
    std::vector<indicators::IndicatorSpec> specs;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string where = "indicators[" + std::to_string(i) + "]";
        check_keys(v[i], {"kind", "window", "source"}, where);
        indicators::IndicatorSpec spec;
        spec.kind = indicators::parse_kind(read<std::string>(v[i], "kind", where, ""));
        spec.window = read_count(v[i], "window", where, 0, 1);
        spec.source = read<std::string>(v[i], "source", where, cfg.target);
        if (spec.window == 0) {
            throw ConfigError(where + ".window is required");
        }
        specs.push_back(spec);
    }
    cfg.indicators = std::move(specs);
}

void parse_selector(const json& j, SelectorSettings& s)
{
    if (!j.contains("selector")) {
        return;
    }
    const auto& v = j.at("selector");
    check_keys(v, {"method", "k", "bins", "corr_cap", "trees", "max_depth", "min_leaf", "rfe_step"}, "selector");
    s.method = featsel::parse_method(read<std::string>(v, "method", "selector", featsel::to_string(s.method)));
    s.k = read_count(v, "k", "selector", s.k, 1);
    s.bins = read_count(v, "bins", "selector", s.bins, 2);
    s.corr_cap = read_number(v, "corr_cap", "selector", s.corr_cap);
    if (!(s.corr_cap > 0.0 && s.corr_cap <= 1.0)) {
        throw ConfigError("selector.corr_cap must be in (0, 1]");
    }
    s.trees = read_count(v, "trees", "selector", s.trees, 1);
    s.max_depth = read_count(v, "max_depth", "selector", s.max_depth, 1);
    s.min_leaf = read_count(v, "min_leaf", "selector", s.min_leaf, 1);
    s.rfe_step = read_count(v, "rfe_step", "selector", s.rfe_step, 1);
}

void parse_roster(const json& j, RunConfig& cfg)
{
    const json none;
    const json& v = j.contains("ensemble") ? j.at("ensemble") : none;
    if (v.is_null() || (v.is_string() && v.get<std::string>() == "default")) {
        cfg.roster = default_roster(Task::regression, cfg.lookback, 0);
        return;
    }
    if (!v.is_array() || v.empty()) {
        throw ConfigError("ensemble must be \"default\" or a non-empty list of member specs");
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string where = "ensemble[" + std::to_string(i) + "]";
        check_keys(v[i],
                   {"kind", "layers", "d_model", "d_k", "ff_hidden", "probsparse", "top_u", "pe_base", "lr", "epochs"},
                   where);
        ModelSpec spec;
        try {
            spec = model_spec_from_json(v[i]);
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.detail());
        }
        spec.lookback = cfg.lookback;
        spec.validate();
        cfg.roster.push_back(spec);
    }
}

void parse_train(const json& j, TrainConfig& t)
{
    if (!j.contains("train")) {
        return;
    }
    const auto& v = j.at("train");
    check_keys(v, {"epochs", "batch", "lr", "loss", "clip_norm"}, "train");
    t.epochs = read_count(v, "epochs", "train", t.epochs, 0);
    t.batch = read_count(v, "batch", "train", t.batch, 1);
    t.lr = read_number(v, "lr", "train", t.lr);
    t.clip_norm = read_number(v, "clip_norm", "train", t.clip_norm);
    if (v.contains("loss") && !v.at("loss").is_null()) {
        t.loss = neural::parse_loss(read<std::string>(v, "loss", "train", ""));
    }
    t.validate();
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string RunConfig::hash() const
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical.dump())));
    return buf;
}

std::vector<ModelSpec> RunConfig::members(Task task) const
{
    std::vector<ModelSpec> out = roster;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].task = task;
        out[i].lookback = lookback;
        out[i].seed = derive_seed(derive_seed(seed, task == Task::regression ? 11 : 13), i);
    }
    return out;
}

const char* to_string(DenoiseTarget target)
{
    switch (target) {
    case DenoiseTarget::features:
        return "features";
    case DenoiseTarget::target:
        return "target";
    case DenoiseTarget::both:
        return "both";
    }
    return "?";
}

RunConfig parse_config(const json& j, const std::filesystem::path& base_dir, std::optional<std::uint64_t> seed_override)
{
    check_keys(j,
               {"description", "data", "target", "columns", "interval", "train_fraction", "horizons", "tasks",
                "outliers", "denoise", "indicators", "selector", "ensemble", "lookback", "train", "threads", "seed",
                "output"},
               "config");
    RunConfig cfg;

    if (!j.contains("data") || !j.at("data").is_string()) {
        throw ConfigError("config.data must name a CSV file");
    }
    const std::filesystem::path data = j.at("data").get<std::string>();
    cfg.data = data.is_absolute() ? data : base_dir / data;
    cfg.target = read<std::string>(j, "target", "config", cfg.target);
    cfg.columns = read<std::vector<std::string>>(j, "columns", "config", {});
    parse_interval(j, cfg);

    cfg.train_fraction = read_number(j, "train_fraction", "config", cfg.train_fraction);
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
        throw ConfigError("train_fraction must be in (0, 1)");
    }

    cfg.horizons = read<std::vector<std::size_t>>(j, "horizons", "config", cfg.horizons);
    if (cfg.horizons.empty()) {
        throw ConfigError("horizons must not be empty");
    }
    for (std::size_t h : cfg.horizons) {
        if (h != 1 && h != 7 && h != 30 && h != 90) {
            throw ConfigError("horizon " + std::to_string(h) + " is not one of 1, 7, 30, 90");
        }
    }
    std::sort(cfg.horizons.begin(), cfg.horizons.end());
    cfg.horizons.erase(std::unique(cfg.horizons.begin(), cfg.horizons.end()), cfg.horizons.end());

    if (j.contains("tasks")) {
        cfg.tasks.clear();
        for (const auto& t : read<std::vector<std::string>>(j, "tasks", "config", {})) {
            const Task task = parse_task(t);
            if (std::find(cfg.tasks.begin(), cfg.tasks.end(), task) == cfg.tasks.end()) {
                cfg.tasks.push_back(task);
            }
        }
        if (cfg.tasks.empty()) {
            throw ConfigError("tasks must not be empty");
        }
    }

    parse_outliers(j, cfg.outliers);
    parse_denoise(j, cfg.denoise);
    parse_indicators(j, cfg);
    parse_selector(j, cfg.selector);
    cfg.lookback = read_count(j, "lookback", "config", cfg.lookback, 1);
    parse_roster(j, cfg);
    parse_train(j, cfg.train);
    cfg.threads = read_count(j, "threads", "config", cfg.threads, 0);

    if (seed_override) {
        cfg.seed = *seed_override;
    } else if (j.contains("seed") && j.at("seed").is_number_unsigned()) {
        cfg.seed = j.at("seed").get<std::uint64_t>();
    } else if (j.contains("seed") && j.at("seed").is_number_integer() && j.at("seed").get<std::int64_t>() >= 0) {
        cfg.seed = static_cast<std::uint64_t>(j.at("seed").get<std::int64_t>());
    } else {
        throw ConfigError("config.seed is required (a non-negative integer), or pass --seed");
    }
    cfg.output = read<std::string>(j, "output", "config", "runs");
    if (cfg.output.is_relative()) {
        cfg.output = base_dir / cfg.output;
    }

    cfg.canonical = j;
    cfg.canonical.erase("output");
    cfg.canonical.erase("threads");
    cfg.canonical["seed"] = cfg.seed;
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override,
                      std::optional<std::filesystem::path> output_override)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + " is not valid JSON: " + e.what());
    }
    auto cfg = parse_config(j, path.parent_path(), seed_override);
    if (output_override) {
        cfg.output = *output_override;
    }
    return cfg;
}

}  // namespace wavestack
