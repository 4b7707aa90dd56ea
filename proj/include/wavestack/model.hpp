#pragma once

#include "wavestack/neural.hpp"
#include "wavestack/tensor.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wavestack {

enum class ModelKind { dense, lstm, gru, indrnn, transformer };
enum class Task { regression, classification };

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);
const char* to_string(Task task);
Task parse_task(const std::string& text);

struct ModelSpec {
    ModelKind kind = ModelKind::lstm;
    std::vector<std::size_t> layers{64};  // hidden sizes; unused by transformer
    std::size_t lookback = 30;
    Task task = Task::regression;
    std::uint64_t seed = 0;

    // transformer only
    std::size_t d_model = 16;
    std::size_t d_k = 16;
    std::size_t ff_hidden = 32;
    bool probsparse = false;
    std::optional<std::size_t> top_u;
    neural::PeBase pe_base = neural::PeBase::input_length;

    // per-member overrides of the shared training config
    std::optional<double> lr;
    std::optional<std::size_t> epochs;

    bool recurrent() const { return kind != ModelKind::dense; }
    void validate() const;
};

nlohmann::json to_json(const ModelSpec& spec);
/// Missing keys keep their defaults; unknown kinds raise ConfigError.
ModelSpec model_spec_from_json(const nlohmann::json& j);

/// A differentiable network mapping one lookback x features window to a
/// scalar: a probability for classification, a real value for regression.
class Network {
public:
    virtual ~Network() = default;

    double forward(const Matrix& window);
    /// Accumulates parameter gradients for the most recent forward pass.
    void backward(double d_output);

    std::span<const neural::NamedTensor> params() const { return params_; }
    std::span<const neural::NamedTensor> grads() const { return grads_; }
    void zero_grad();

protected:
    explicit Network(Task task) : task_(task) {}
    virtual double forward_raw(const Matrix& window) = 0;
    virtual void backward_raw(double d_raw) = 0;
    void register_tensors(std::vector<neural::NamedTensor> params, std::vector<neural::NamedTensor> grads);

private:
    Task task_;
    double last_output_ = 0.0;
    std::vector<neural::NamedTensor> params_;
    std::vector<neural::NamedTensor> grads_;
};

/// Builds a randomly initialised network seeded from spec.seed.
std::unique_ptr<Network> make_network(const ModelSpec& spec, std::size_t features);

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch = 64;
    double lr = 0.001;
    std::optional<neural::LossKind> loss;  // unset: logcosh for regression, bce for classification
    double clip_norm = 5.0;                // recurrent members only
    double divergence_factor = 1e4;        // batch loss above factor * max(first batch loss, 1) diverges

    void validate() const;
};

/// windows[i] is lookback x features.
struct Dataset {
    std::vector<Matrix> windows;
    std::vector<double> targets;

    std::size_t size() const { return windows.size(); }
    std::size_t features() const { return windows.empty() ? 0 : windows.front().cols(); }
    void validate(std::size_t lookback) const;
};

class TrainedModel {
public:
    TrainedModel(ModelSpec spec, std::size_t features);

    const ModelSpec& spec() const { return spec_; }
    std::size_t features() const { return features_; }
    const std::vector<double>& loss_history() const { return loss_history_; }

    /// Not safe to call concurrently on one model: forward passes reuse caches.
    double predict(const Matrix& window) const;
    std::vector<double> predict(std::span<const Matrix> windows) const;

    /// All parameters concatenated in tensor order.
    std::vector<double> flat_parameters() const;

    /// Writes a JSON manifest plus a little-endian float64 blob next to it.
    void save(const std::filesystem::path& manifest, const std::filesystem::path& blob) const;
    static TrainedModel load(const std::filesystem::path& manifest);

private:
    friend TrainedModel train(const ModelSpec&, const Dataset&, const TrainConfig&);

    ModelSpec spec_;
    std::size_t features_;
    std::vector<double> loss_history_;
    std::unique_ptr<Network> net_;
};

/// Mini-batch Adam training with full backpropagation through the lookback
/// window. Throws DivergenceError naming the epoch on a non-finite or
/// exploding loss.
TrainedModel train(const ModelSpec& spec, const Dataset& data, const TrainConfig& config);

neural::LossKind default_loss(Task task);

}  // namespace wavestack
