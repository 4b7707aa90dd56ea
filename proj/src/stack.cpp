#include "wavestack/stack.hpp"

#include "wavestack/error.hpp"
#include "wavestack/parallel.hpp"
#include "wavestack/random.hpp"

#include <exception>
#include <fstream>
#include <optional>

namespace wavestack {

namespace {

std::size_t check_members(const std::vector<std::vector<double>>& m)
{
    if (m.empty()) {
        throw ConfigError("cannot combine an empty ensemble");
    }
    const std::size_t samples = m.front().size();
    for (std::size_t i = 1; i < m.size(); ++i) {
        if (m[i].size() != samples) {
            throw ShapeError("member " + std::to_string(i) + " has " + std::to_string(m[i].size()) +
                             " predictions, member 0 has " + std::to_string(samples));
        }
    }
    return samples;
}

}  // namespace

std::vector<double> combine_regression(const std::vector<std::vector<double>>& preds)
{
    const std::size_t samples = check_members(preds);
    std::vector<double> out(samples, 0.0);
    for (std::size_t s = 0; s < samples; ++s) {
        for (const auto& member : preds) {
            out[s] += member[s];
        }
        out[s] /= static_cast<double>(preds.size());
    }
    return out;
}

std::vector<int> combine_vote(const std::vector<std::vector<double>>& probs, double threshold)
{
    const std::size_t samples = check_members(probs);
    std::vector<int> out(samples, 0);
    for (std::size_t s = 0; s < samples; ++s) {
        std::size_t votes = 0;
        for (const auto& member : probs) {
            votes += member[s] > threshold ? 1 : 0;
        }
        out[s] = 2 * votes > probs.size() ? 1 : 0;
    }
    return out;
}

Ensemble::Ensemble(Task task, std::vector<TrainedModel> members, double threshold)
    : task_(task), members_(std::move(members)), threshold_(threshold)
{
    if (members_.empty()) {
        throw ConfigError("ensemble needs at least one member");
    }
    for (std::size_t i = 0; i < members_.size(); ++i) {
        if (members_[i].spec().task != task_) {
            throw ConfigError("member " + std::to_string(i) + " is a " + to_string(members_[i].spec().task) +
                              " model in a " + to_string(task_) + " ensemble");
        }
    }
}

EnsembleOutput Ensemble::predict(std::span<const Matrix> windows) const
{
    EnsembleOutput out;
    out.task = task_;
    for (const auto& m : members_) {
        out.members.push_back(m.predict(windows));
    }
    if (task_ == Task::regression) {
        out.combined = combine_regression(out.members);
    } else {
        out.score = combine_regression(out.members);
        const auto votes = combine_vote(out.members, threshold_);
        out.combined.assign(votes.begin(), votes.end());
    }
    return out;
}

void Ensemble::save(const std::filesystem::path& dir) const
{
    std::filesystem::create_directories(dir);
    nlohmann::json members = nlohmann::json::array();
    for (std::size_t i = 0; i < members_.size(); ++i) {
        const std::string stem = "member_" + std::to_string(i);
        members_[i].save(dir / (stem + ".json"), dir / (stem + ".bin"));
        members.push_back({{"manifest", stem + ".json"},
                           {"blob", stem + ".bin"},
                           {"kind", to_string(members_[i].spec().kind)},
                           {"seed", members_[i].spec().seed}});
    }
    nlohmann::json j{
        {"format", "wavestack-ensemble"}, {"version", 1},        {"task", to_string(task_)},
        {"threshold", threshold_},        {"members", members}, {"metadata", metadata_},
    };
    std::ofstream out(dir / "ensemble.json", std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + (dir / "ensemble.json").string());
    }
    out << j.dump(2) << '\n';
}

Ensemble Ensemble::load(const std::filesystem::path& dir)
{
    const auto path = dir / "ensemble.json";
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "wavestack-ensemble") {
        throw StructureError(path.string() + " is not an ensemble manifest");
    }
    std::vector<TrainedModel> members;
    for (const auto& m : j.at("members")) {
        members.push_back(TrainedModel::load(dir / m.at("manifest").get<std::string>()));
    }
    Ensemble e(parse_task(j.at("task").get<std::string>()), std::move(members), j.value("threshold", 0.5));
    e.metadata_ = j.value("metadata", nlohmann::json::object());
    return e;
}

Ensemble fit_ensemble(const Dataset& data, std::span<const ModelSpec> specs, const TrainConfig& config,
                      std::size_t threads)
{
    if (specs.empty()) {
        throw ConfigError("ensemble roster is empty");
    }
    const Task task = specs.front().task;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (specs[i].task != task) {
            throw ConfigError("roster mixes tasks: member " + std::to_string(i) + " is " + to_string(specs[i].task));
        }
        specs[i].validate();
    }
    config.validate();

    std::vector<std::optional<TrainedModel>> slots(specs.size());
    std::vector<std::exception_ptr> errors(specs.size());
    parallel_for(
        specs.size(),
        [&](std::size_t i) {
            try {
                slots[i].emplace(train(specs[i], data, config));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        },
        threads);

    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (!errors[i]) {
            continue;
        }
        const std::string who = "ensemble member " + std::to_string(i) + " (" + to_string(specs[i].kind) + "): ";
        try {
            std::rethrow_exception(errors[i]);
        } catch (const Error& e) {
            throw_error(e.kind(), who + e.detail());
        }
    }
    std::vector<TrainedModel> members;
    for (auto& slot : slots) {
        members.push_back(std::move(*slot));
    }
    return Ensemble(task, std::move(members));
}

std::vector<ModelSpec> default_roster(Task task, std::size_t lookback, std::uint64_t seed)
{
    std::vector<ModelSpec> roster;
    for (auto kind : {ModelKind::lstm, ModelKind::gru, ModelKind::indrnn, ModelKind::transformer, ModelKind::dense}) {
        ModelSpec spec;
        spec.kind = kind;
        spec.task = task;
        spec.lookback = lookback;
        spec.layers = kind == ModelKind::transformer ? std::vector<std::size_t>{} : std::vector<std::size_t>{64};
        spec.seed = derive_seed(seed, roster.size());
        roster.push_back(spec);
    }
    return roster;
}

}  // namespace wavestack
