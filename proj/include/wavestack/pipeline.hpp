#pragma once

#include "wavestack/config.hpp"
#include "wavestack/date.hpp"
#include "wavestack/model.hpp"

#include "json.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace wavestack::pipeline {

// Stage-wise entry points. Each reads the previous stage's artifacts from
// `dir`, raising DependencyError naming the command to run first, and removes
// whatever it wrote if it fails.
//
//   features -> features_raw.csv, outliers.json, split.json
//   denoise  -> features.csv, denoise.csv, denoise.json
//   select   -> selection_<task>_h<h>.json
//   train    -> ensemble_<task>_h<h>/, loss_history.csv
//   evaluate -> predictions_<task>_h<h>.csv, report.json
//   predict  -> forecast_<task>_h<h>.json
//   report   -> metrics.csv, metric_<name>.csv, roc_<task>_h<h>.csv, series_<task>_h<h>.csv

void stage_features(const RunConfig& cfg, const std::filesystem::path& dir);
void stage_denoise(const RunConfig& cfg, const std::filesystem::path& dir);
void stage_select(const RunConfig& cfg, const std::filesystem::path& dir);
void stage_train(const RunConfig& cfg, const std::filesystem::path& dir);
/// Returns the EvalReport list written to report.json.
nlohmann::json stage_evaluate(const RunConfig& cfg, const std::filesystem::path& dir,
                              std::optional<std::size_t> horizon = std::nullopt);

struct Forecast {
    Task task = Task::regression;
    std::size_t horizon = 1;
    Date origin;
    std::vector<std::string> kinds;
    std::vector<double> members;
    double combined = 0.0;
    std::optional<double> score;  // classification: mean member probability
};

/// Forecasts from the final available window of every trained ensemble.
std::vector<Forecast> stage_predict(const RunConfig& cfg, const std::filesystem::path& dir,
                                    std::optional<std::size_t> horizon = std::nullopt);

void stage_report(const std::filesystem::path& run_dir);

/// Full pipeline into cfg.run_dir(). The run is built in a sibling directory
/// and renamed into place only on success.
std::filesystem::path run(const RunConfig& cfg);

std::string artifact_stem(Task task, std::size_t horizon);

}  // namespace wavestack::pipeline
