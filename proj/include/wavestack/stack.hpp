#pragma once

#include "wavestack/model.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace wavestack {

/// Per-sample arithmetic mean over members (preds is members x samples).
std::vector<double> combine_regression(const std::vector<std::vector<double>>& preds);

/// A member votes 1 iff its probability exceeds the threshold; the ensemble
/// says 1 iff more than half the members vote 1, so an even split gives 0.
std::vector<int> combine_vote(const std::vector<std::vector<double>>& probs, double threshold = 0.5);

struct EnsembleOutput {
    Task task = Task::regression;
    std::vector<std::vector<double>> members;  // members x samples
    std::vector<double> combined;              // mean, or the 0/1 vote
    std::vector<double> score;                 // classification: mean member probability
};

class Ensemble {
public:
    Ensemble(Task task, std::vector<TrainedModel> members, double threshold = 0.5);

    Task task() const { return task_; }
    double threshold() const { return threshold_; }
    std::size_t size() const { return members_.size(); }
    const TrainedModel& member(std::size_t i) const { return members_.at(i); }
    const std::vector<TrainedModel>& members() const { return members_; }

    /// Free-form data stored alongside the members in ensemble.json.
    nlohmann::json& metadata() { return metadata_; }
    const nlohmann::json& metadata() const { return metadata_; }

    EnsembleOutput predict(std::span<const Matrix> windows) const;

    /// Writes ensemble.json plus member_<i>.json / member_<i>.bin into dir.
    void save(const std::filesystem::path& dir) const;
    static Ensemble load(const std::filesystem::path& dir);

private:
    Task task_;
    std::vector<TrainedModel> members_;
    double threshold_;
    nlohmann::json metadata_ = nlohmann::json::object();
};

/// Trains every member on the same data, concurrently. A diverging member is
/// reported by index and kind.
Ensemble fit_ensemble(const Dataset& data, std::span<const ModelSpec> specs, const TrainConfig& config,
                      std::size_t threads = 0);

/// One member of each kind: lstm, gru, indrnn, transformer, dense. Member i
/// is seeded with derive_seed(seed, i).
std::vector<ModelSpec> default_roster(Task task, std::size_t lookback, std::uint64_t seed);

}  // namespace wavestack
