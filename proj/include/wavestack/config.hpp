#pragma once

#include "wavestack/featsel.hpp"
#include "wavestack/indicators.hpp"
#include "wavestack/ingest.hpp"
#include "wavestack/model.hpp"
#include "wavestack/wavelet.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace wavestack {

struct OutlierSettings {
    bool enabled = true;
    std::size_t trees = 100;
    std::optional<std::size_t> subsample;
    double contamination = 0.01;
};

enum class DenoiseTarget { features, target, both };

struct DenoiseSettings {
    bool enabled = true;
    DenoiseConfig config;
    DenoiseTarget apply_to = DenoiseTarget::both;
    std::size_t window = 32;
};

struct SelectorSettings {
    featsel::Method method = featsel::Method::embedded;
    std::size_t k = 20;
    std::size_t bins = 10;
    double corr_cap = 0.9;
    std::size_t trees = 100;
    std::size_t max_depth = 8;
    std::size_t min_leaf = 1;
    std::size_t rfe_step = 1;
};

struct RunConfig {
    std::filesystem::path data;  // resolved against the config file's directory
    std::string target = "price";
    std::vector<std::string> columns;  // empty: every CSV column
    std::string interval_name = "full";
    std::optional<DateInterval> interval;
    double train_fraction = 0.8;
    std::vector<std::size_t> horizons{1};
    std::vector<Task> tasks{Task::regression, Task::classification};
    OutlierSettings outliers;
    DenoiseSettings denoise;
    std::optional<std::vector<indicators::IndicatorSpec>> indicators;  // unset: default grid over all columns
    SelectorSettings selector;
    std::vector<ModelSpec> roster;  // task and seed are assigned per run
    std::size_t lookback = 30;
    TrainConfig train;
    std::size_t threads = 0;
    std::uint64_t seed = 0;
    std::filesystem::path output = "runs";

    /// The parsed config with the effective seed, minus `output`; the basis of
    /// the run hash.
    nlohmann::json canonical;

    /// 16 hex digits of FNV-1a 64 over canonical.dump().
    std::string hash() const;
    std::filesystem::path run_dir() const { return output / ("run-" + hash()); }

    /// Roster for one task with per-member seeds derived from the run seed.
    std::vector<ModelSpec> members(Task task) const;
};

std::uint64_t fnv1a64(const std::string& bytes);

/// Validates every key before any data is touched. A missing seed is a
/// configuration error unless seed_override is given.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir,
                       std::optional<std::uint64_t> seed_override = std::nullopt);

RunConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = std::nullopt,
                      std::optional<std::filesystem::path> output_override = std::nullopt);

const char* to_string(DenoiseTarget target);

}  // namespace wavestack
