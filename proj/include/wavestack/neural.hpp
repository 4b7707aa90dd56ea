#pragma once

#include "wavestack/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace wavestack::neural {

using Vec = std::vector<double>;

/// Named view of a parameter tensor, used for serialization, optimizers and
/// gradient checks.
struct NamedTensor {
    std::string name;
    Matrix* tensor;
};

double sigmoid(double x);

/// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
void init_uniform(Matrix& m, std::size_t fan_in, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Dense

enum class Activation { identity, relu, sigmoid, tanh };

struct DenseParams {
    Matrix w;  // out x in
    Matrix b;  // out x 1

    static DenseParams zeros(std::size_t in, std::size_t out);
    static DenseParams random(std::size_t in, std::size_t out, std::mt19937_64& rng);
    std::size_t in() const { return w.cols(); }
    std::size_t out() const { return w.rows(); }
    std::vector<NamedTensor> tensors(const std::string& prefix);
};

struct DenseCache {
    Vec x, pre, y;
};

Vec dense_forward(const DenseParams& p, std::span<const double> x, Activation act, DenseCache* cache = nullptr);
/// Accumulates into `grads`; returns dL/dx.
Vec dense_backward(const DenseParams& p, const DenseCache& cache, Activation act, std::span<const double> dy,
                   DenseParams& grads);

// ---------------------------------------------------------------------------
// LSTM

struct LstmParams {
    Matrix w_f, w_i, w_o, w_c;  // m x n
    Matrix u_f, u_i, u_o, u_c;  // m x m
    Matrix b_f, b_i, b_o, b_c;  // m x 1

    static LstmParams zeros(std::size_t input, std::size_t hidden);
    static LstmParams random(std::size_t input, std::size_t hidden, std::mt19937_64& rng);
    std::size_t input_size() const { return w_f.cols(); }
    std::size_t hidden_size() const { return w_f.rows(); }
    std::vector<NamedTensor> tensors(const std::string& prefix);
};

struct LstmCache {
    Vec x, h_prev, c_prev, f, i, o, g, c, tanh_c;
};

struct LstmState {
    Vec h, c;
};

LstmState lstm_step(const LstmParams& p, std::span<const double> x, std::span<const double> h_prev,
                    std::span<const double> c_prev, LstmCache* cache = nullptr);

struct LstmStepGrad {
    Vec dx, dh_prev, dc_prev;
};

LstmStepGrad lstm_step_backward(const LstmParams& p, const LstmCache& cache, std::span<const double> dh,
                                std::span<const double> dc, LstmParams& grads);

// ---------------------------------------------------------------------------
// GRU

struct GruParams {
    Matrix w_z, w_r, w_h;  // m x n
    Matrix u_z, u_r, u_h;  // m x m
    Matrix b_z, b_r, b_h;  // m x 1

    static GruParams zeros(std::size_t input, std::size_t hidden);
    static GruParams random(std::size_t input, std::size_t hidden, std::mt19937_64& rng);
    std::size_t input_size() const { return w_z.cols(); }
    std::size_t hidden_size() const { return w_z.rows(); }
    std::vector<NamedTensor> tensors(const std::string& prefix);
};

struct GruCache {
    Vec x, h_prev, z, r, rh, cand, h;
};

/// h_t = z * cand + (1 - z) * h_prev
Vec gru_step(const GruParams& p, std::span<const double> x, std::span<const double> h_prev, GruCache* cache = nullptr);

struct StepGrad {
    Vec dx, dh_prev;
};

StepGrad gru_step_backward(const GruParams& p, const GruCache& cache, std::span<const double> dh, GruParams& grads);

// ---------------------------------------------------------------------------
// IndRNN

struct IndRnnParams {
    Matrix w;  // N x M
    Matrix u;  // N x 1, element-wise recurrence
    Matrix b;  // N x 1

    static IndRnnParams zeros(std::size_t input, std::size_t hidden);
    static IndRnnParams random(std::size_t input, std::size_t hidden, std::mt19937_64& rng);
    std::size_t input_size() const { return w.cols(); }
    std::size_t hidden_size() const { return w.rows(); }
    std::vector<NamedTensor> tensors(const std::string& prefix);
};

struct IndRnnCache {
    Vec x, h_prev, pre, h;
};

/// h_t = relu(W x + u * h_prev + b)
Vec indrnn_step(const IndRnnParams& p, std::span<const double> x, std::span<const double> h_prev,
                IndRnnCache* cache = nullptr);

StepGrad indrnn_step_backward(const IndRnnParams& p, const IndRnnCache& cache, std::span<const double> dh,
                              IndRnnParams& grads);

// ---------------------------------------------------------------------------
// Attention

enum class PeBase { input_length, conventional };

/// PE[pos, 2j] = sin(pos / base^(2j/d_model)), PE[pos, 2j+1] = cos(...), with
/// base = 2 * length, or 10000 for PeBase::conventional.
Matrix positional_encoding(std::size_t length, std::size_t d_model, PeBase base = PeBase::input_length);

struct AttentionConfig {
    std::size_t d_model = 16;
    std::size_t d_k = 16;
    std::size_t heads = 1;
    bool probsparse = false;
    std::optional<std::size_t> top_u;  // unset: auto

    void validate() const;
};

/// min(L_q, ceil(5 ln L_q)), at least 1.
std::size_t auto_top_u(std::size_t queries);

struct AttentionCache {
    Matrix q, k, v;
    Matrix weights;            // softmax rows; zero for inactive queries
    std::vector<bool> active;  // false: row emits the mean of V
    double scale = 1.0;
};

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& scores);

Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t d_k,
                 AttentionCache* cache = nullptr);

/// M(q_i, K) = ln sum_j exp(s_ij) - mean_j s_ij with s = q k^T / sqrt(d_k).
Vec sparsity_measure(const Matrix& q, const Matrix& k, std::size_t d_k);

/// Indices of the u largest entries, ties to the lower index, in ascending
/// index order.
std::vector<std::size_t> top_queries(std::span<const double> measure, std::size_t u);

Matrix probsparse_attention(const Matrix& q, const Matrix& k, const Matrix& v, const AttentionConfig& cfg,
                            AttentionCache* cache = nullptr);

struct AttentionGrad {
    Matrix dq, dk, dv;
};

AttentionGrad attention_backward(const AttentionCache& cache, const Matrix& d_out);

// ---------------------------------------------------------------------------
// Losses

enum class LossKind { mse, logcosh, bce };

const char* to_string(LossKind kind);
LossKind parse_loss(const std::string& text);

struct LossValue {
    double value = 0.0;
    Vec grad;  // d value / d prediction
};

LossValue mse(std::span<const double> pred, std::span<const double> target);
LossValue logcosh(std::span<const double> pred, std::span<const double> target);
/// Probabilities are clamped to [1e-7, 1 - 1e-7]; the gradient is taken at the
/// clamped value.
LossValue bce(std::span<const double> prob, std::span<const double> label);
LossValue loss(LossKind kind, std::span<const double> pred, std::span<const double> target);

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<Vec> m;
    std::vector<Vec> v;

    /// Starts a new step; call once before the per-tensor updates.
    void begin_step();
    /// Updates one parameter tensor in slot `slot`.
    void update(std::size_t slot, std::span<double> params, std::span<const double> grads);
};

/// One full step on a single flat parameter vector.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

/// Rescales all gradients so their joint L2 norm is at most max_norm. Returns
/// the norm before clipping.
double clip_gradients(std::span<const NamedTensor> grads, double max_norm);

}  // namespace wavestack::neural
