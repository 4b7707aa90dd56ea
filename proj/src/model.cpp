#include "wavestack/model.hpp"

#include "wavestack/error.hpp"
#include "wavestack/random.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace wavestack {

using neural::NamedTensor;
using neural::Vec;

namespace {

std::string lowercase(const std::string& text)
{
    std::string out;
    for (char c : text) {
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

std::vector<NamedTensor> concat(std::vector<NamedTensor> a, const std::vector<NamedTensor>& b)
{
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

// ---------------------------------------------------------------------------
// Sequence layers: T x in -> T x hidden, zero initial state.

class SeqLayer {
public:
    virtual ~SeqLayer() = default;
    virtual Matrix forward(const Matrix& xs) = 0;
    /// dhs: gradient on every output row. Returns the gradient on the inputs.
    virtual Matrix backward(const Matrix& dhs) = 0;
    virtual std::vector<NamedTensor> params(const std::string& prefix) = 0;
    virtual std::vector<NamedTensor> grads(const std::string& prefix) = 0;
};

class LstmLayer final : public SeqLayer {
public:
    LstmLayer(std::size_t in, std::size_t hidden, std::mt19937_64& rng)
        : p_(neural::LstmParams::random(in, hidden, rng)), g_(neural::LstmParams::zeros(in, hidden))
    {
    }

    Matrix forward(const Matrix& xs) override
    {
        const std::size_t m = p_.hidden_size();
        caches_.resize(xs.rows());
        Matrix out(xs.rows(), m);
        neural::LstmState s{Vec(m, 0.0), Vec(m, 0.0)};
        for (std::size_t t = 0; t < xs.rows(); ++t) {
            s = neural::lstm_step(p_, xs.row(t), s.h, s.c, &caches_[t]);
            std::copy(s.h.begin(), s.h.end(), out.row(t).begin());
        }
        return out;
    }

    Matrix backward(const Matrix& dhs) override
    {
        const std::size_t m = p_.hidden_size();
        Matrix dxs(dhs.rows(), p_.input_size());
        Vec dh_next(m, 0.0);
        Vec dc_next(m, 0.0);
        for (std::size_t t = dhs.rows(); t-- > 0;) {
            Vec dh(dhs.row(t).begin(), dhs.row(t).end());
            for (std::size_t k = 0; k < m; ++k) {
                dh[k] += dh_next[k];
            }
            auto g = neural::lstm_step_backward(p_, caches_[t], dh, dc_next, g_);
            std::copy(g.dx.begin(), g.dx.end(), dxs.row(t).begin());
            dh_next = std::move(g.dh_prev);
            dc_next = std::move(g.dc_prev);
        }
        return dxs;
    }

    std::vector<NamedTensor> params(const std::string& prefix) override { return p_.tensors(prefix); }
    std::vector<NamedTensor> grads(const std::string& prefix) override { return g_.tensors(prefix); }

private:
    neural::LstmParams p_, g_;
    std::vector<neural::LstmCache> caches_;
};

class GruLayer final : public SeqLayer {
public:
    GruLayer(std::size_t in, std::size_t hidden, std::mt19937_64& rng)
        : p_(neural::GruParams::random(in, hidden, rng)), g_(neural::GruParams::zeros(in, hidden))
    {
    }

    Matrix forward(const Matrix& xs) override
    {
        const std::size_t m = p_.hidden_size();
        caches_.resize(xs.rows());
        Matrix out(xs.rows(), m);
        Vec h(m, 0.0);
        for (std::size_t t = 0; t < xs.rows(); ++t) {
            h = neural::gru_step(p_, xs.row(t), h, &caches_[t]);
            std::copy(h.begin(), h.end(), out.row(t).begin());
        }
        return out;
    }

    Matrix backward(const Matrix& dhs) override
    {
        const std::size_t m = p_.hidden_size();
        Matrix dxs(dhs.rows(), p_.input_size());
        Vec dh_next(m, 0.0);
        for (std::size_t t = dhs.rows(); t-- > 0;) {
            Vec dh(dhs.row(t).begin(), dhs.row(t).end());
            for (std::size_t k = 0; k < m; ++k) {
                dh[k] += dh_next[k];
            }
            auto g = neural::gru_step_backward(p_, caches_[t], dh, g_);
            std::copy(g.dx.begin(), g.dx.end(), dxs.row(t).begin());
            dh_next = std::move(g.dh_prev);
        }
        return dxs;
    }

    std::vector<NamedTensor> params(const std::string& prefix) override { return p_.tensors(prefix); }
    std::vector<NamedTensor> grads(const std::string& prefix) override { return g_.tensors(prefix); }

private:
    neural::GruParams p_, g_;
    std::vector<neural::GruCache> caches_;
};

class IndRnnLayer final : public SeqLayer {
public:
    IndRnnLayer(std::size_t in, std::size_t hidden, std::mt19937_64& rng)
        : p_(neural::IndRnnParams::random(in, hidden, rng)), g_(neural::IndRnnParams::zeros(in, hidden))
    {
    }

    Matrix forward(const Matrix& xs) override
    {
        const std::size_t m = p_.hidden_size();
        caches_.resize(xs.rows());
        Matrix out(xs.rows(), m);
        Vec h(m, 0.0);
        for (std::size_t t = 0; t < xs.rows(); ++t) {
            h = neural::indrnn_step(p_, xs.row(t), h, &caches_[t]);
            std::copy(h.begin(), h.end(), out.row(t).begin());
        }
        return out;
    }

    Matrix backward(const Matrix& dhs) override
    {
        const std::size_t m = p_.hidden_size();
        Matrix dxs(dhs.rows(), p_.input_size());
        Vec dh_next(m, 0.0);
        for (std::size_t t = dhs.rows(); t-- > 0;) {
            Vec dh(dhs.row(t).begin(), dhs.row(t).end());
            for (std::size_t k = 0; k < m; ++k) {
                dh[k] += dh_next[k];
            }
            auto g = neural::indrnn_step_backward(p_, caches_[t], dh, g_);
            std::copy(g.dx.begin(), g.dx.end(), dxs.row(t).begin());
            dh_next = std::move(g.dh_prev);
        }
        return dxs;
    }

    std::vector<NamedTensor> params(const std::string& prefix) override { return p_.tensors(prefix); }
    std::vector<NamedTensor> grads(const std::string& prefix) override { return g_.tensors(prefix); }

private:
    neural::IndRnnParams p_, g_;
    std::vector<neural::IndRnnCache> caches_;
};

std::unique_ptr<SeqLayer> make_layer(ModelKind kind, std::size_t in, std::size_t hidden, std::mt19937_64& rng)
{
    switch (kind) {
    case ModelKind::lstm:
    case ModelKind::transformer:
        return std::make_unique<LstmLayer>(in, hidden, rng);
    case ModelKind::gru:
        return std::make_unique<GruLayer>(in, hidden, rng);
    case ModelKind::indrnn:
        return std::make_unique<IndRnnLayer>(in, hidden, rng);
    case ModelKind::dense:
        break;
    }
    throw ConfigError("no sequence layer for model kind");
}

// ---------------------------------------------------------------------------
// Networks

class DenseNet final : public Network {
public:
    DenseNet(const ModelSpec& spec, std::size_t features, std::mt19937_64& rng) : Network(spec.task)
    {
        std::size_t in = spec.lookback * features;
        for (std::size_t width : spec.layers) {
            p_.push_back(neural::DenseParams::random(in, width, rng));
            g_.push_back(neural::DenseParams::zeros(in, width));
            in = width;
        }
        caches_.resize(p_.size());
        head_p_ = neural::DenseParams::random(in, 1, rng);
        head_g_ = neural::DenseParams::zeros(in, 1);

        std::vector<NamedTensor> params, grads;
        for (std::size_t i = 0; i < p_.size(); ++i) {
            const std::string prefix = "dense" + std::to_string(i) + ".";
            params = concat(std::move(params), p_[i].tensors(prefix));
            grads = concat(std::move(grads), g_[i].tensors(prefix));
        }
        register_tensors(concat(std::move(params), head_p_.tensors("head.")),
                         concat(std::move(grads), head_g_.tensors("head.")));
    }

protected:
    double forward_raw(const Matrix& window) override
    {
        Vec x(window.data().begin(), window.data().end());
        for (std::size_t i = 0; i < p_.size(); ++i) {
            x = neural::dense_forward(p_[i], x, neural::Activation::relu, &caches_[i]);
        }
        return neural::dense_forward(head_p_, x, neural::Activation::identity, &head_cache_)[0];
    }

    void backward_raw(double d_raw) override
    {
        const double d[] = {d_raw};
        Vec dx = neural::dense_backward(head_p_, head_cache_, neural::Activation::identity, d, head_g_);
        for (std::size_t i = p_.size(); i-- > 0;) {
            dx = neural::dense_backward(p_[i], caches_[i], neural::Activation::relu, dx, g_[i]);
        }
    }

private:
    std::vector<neural::DenseParams> p_, g_;
    std::vector<neural::DenseCache> caches_;
    neural::DenseParams head_p_, head_g_;
    neural::DenseCache head_cache_;
};

class RecurrentNet final : public Network {
public:
    RecurrentNet(const ModelSpec& spec, std::size_t features, std::mt19937_64& rng) : Network(spec.task)
    {
        std::size_t in = features;
        for (std::size_t width : spec.layers) {
            layers_.push_back(make_layer(spec.kind, in, width, rng));
            in = width;
        }
        head_p_ = neural::DenseParams::random(in, 1, rng);
        head_g_ = neural::DenseParams::zeros(in, 1);

        std::vector<NamedTensor> params, grads;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const std::string prefix = std::string(to_string(spec.kind)) + std::to_string(i) + ".";
            params = concat(std::move(params), layers_[i]->params(prefix));
            grads = concat(std::move(grads), layers_[i]->grads(prefix));
        }
        register_tensors(concat(std::move(params), head_p_.tensors("head.")),
                         concat(std::move(grads), head_g_.tensors("head.")));
    }

protected:
    double forward_raw(const Matrix& window) override
    {
        Matrix h = window;
        for (auto& layer : layers_) {
            h = layer->forward(h);
        }
        steps_ = h.rows();
        return neural::dense_forward(head_p_, h.row(h.rows() - 1), neural::Activation::identity, &head_cache_)[0];
    }

    void backward_raw(double d_raw) override
    {
        const double d[] = {d_raw};
        Vec d_last = neural::dense_backward(head_p_, head_cache_, neural::Activation::identity, d, head_g_);
        Matrix dh(steps_, d_last.size());
        std::copy(d_last.begin(), d_last.end(), dh.row(steps_ - 1).begin());
        for (std::size_t i = layers_.size(); i-- > 0;) {
            dh = layers_[i]->backward(dh);
        }
    }

private:
    std::vector<std::unique_ptr<SeqLayer>> layers_;
    neural::DenseParams head_p_, head_g_;
    neural::DenseCache head_cache_;
    std::size_t steps_ = 0;
};

/// LSTM input embedding + positional encoding, one single-head attention block
/// with residual, a ReLU feed-forward block with residual, and a dense head on
/// the final position.
class TransformerNet final : public Network {
public:
    TransformerNet(const ModelSpec& spec, std::size_t features, std::mt19937_64& rng)
        : Network(spec.task), embed_(features, spec.d_model, rng)
    {
        const std::size_t d = spec.d_model;
        cfg_ = neural::AttentionConfig{d, spec.d_k, 1, spec.probsparse, spec.top_u};
        pe_ = neural::positional_encoding(spec.lookback, d, spec.pe_base);
        auto init = [&](Matrix& m, std::size_t rows, std::size_t cols, std::size_t fan_in) {
            m = Matrix(rows, cols);
            neural::init_uniform(m, fan_in, rng);
        };
        init(wq_, d, spec.d_k, d);
        init(wk_, d, spec.d_k, d);
        init(wv_, d, spec.d_k, d);
        init(wo_, spec.d_k, d, spec.d_k);
        init(w1_, d, spec.ff_hidden, d);
        b1_ = Matrix(1, spec.ff_hidden);
        init(w2_, spec.ff_hidden, d, spec.ff_hidden);
        b2_ = Matrix(1, d);
        head_p_ = neural::DenseParams::random(d, 1, rng);
        head_g_ = neural::DenseParams::zeros(d, 1);
        for (auto [g, p] : {std::pair{&gwq_, &wq_}, std::pair{&gwk_, &wk_}, std::pair{&gwv_, &wv_},
                            std::pair{&gwo_, &wo_}, std::pair{&gw1_, &w1_}, std::pair{&gb1_, &b1_},
                            std::pair{&gw2_, &w2_}, std::pair{&gb2_, &b2_}}) {
            *g = Matrix(p->rows(), p->cols());
        }

        auto block = [](Matrix& q, Matrix& k, Matrix& v, Matrix& o, Matrix& w1, Matrix& b1, Matrix& w2,
                        Matrix& b2) {
            return std::vector<NamedTensor>{{"attn.wq", &q}, {"attn.wk", &k}, {"attn.wv", &v}, {"attn.wo", &o},
                                            {"ffn.w1", &w1}, {"ffn.b1", &b1}, {"ffn.w2", &w2}, {"ffn.b2", &b2}};
        };
        register_tensors(concat(concat(embed_.params("embed."), block(wq_, wk_, wv_, wo_, w1_, b1_, w2_, b2_)),
                                head_p_.tensors("head.")),
                         concat(concat(embed_.grads("embed."), block(gwq_, gwk_, gwv_, gwo_, gw1_, gb1_, gw2_, gb2_)),
                                head_g_.tensors("head.")));
    }

protected:
    double forward_raw(const Matrix& window) override
    {
        if (window.rows() != pe_.rows()) {
            throw ShapeError("transformer window has " + std::to_string(window.rows()) + " rows, expected " +
                             std::to_string(pe_.rows()));
        }
        e_ = embed_.forward(window);
        e_ += pe_;
        const Matrix q = matmul(e_, wq_);
        const Matrix k = matmul(e_, wk_);
        const Matrix v = matmul(e_, wv_);
        a_ = cfg_.probsparse ? neural::probsparse_attention(q, k, v, cfg_, &attn_cache_)
                             : neural::attention(q, k, v, cfg_.d_k, &attn_cache_);
        z_ = e_;
        z_ += matmul(a_, wo_);
        pre1_ = matmul(z_, w1_);
        f1_ = Matrix(pre1_.rows(), pre1_.cols());
        for (std::size_t r = 0; r < pre1_.rows(); ++r) {
            for (std::size_t c = 0; c < pre1_.cols(); ++c) {
                pre1_(r, c) += b1_(0, c);
                f1_(r, c) = pre1_(r, c) > 0.0 ? pre1_(r, c) : 0.0;
            }
        }
        // Only the final position feeds the head.
        const std::size_t last = z_.rows() - 1;
        Vec y(z_.row(last).begin(), z_.row(last).end());
        for (std::size_t c = 0; c < y.size(); ++c) {
            y[c] += b2_(0, c);
            for (std::size_t j = 0; j < f1_.cols(); ++j) {
                y[c] += f1_(last, j) * w2_(j, c);
            }
        }
        return neural::dense_forward(head_p_, y, neural::Activation::identity, &head_cache_)[0];
    }

    void backward_raw(double d_raw) override
    {
        const double d[] = {d_raw};
        const Vec dy = neural::dense_backward(head_p_, head_cache_, neural::Activation::identity, d, head_g_);
        const std::size_t steps = z_.rows();
        const std::size_t last = steps - 1;

        Matrix dz(steps, z_.cols());
        std::copy(dy.begin(), dy.end(), dz.row(last).begin());
        Vec dpre1(f1_.cols(), 0.0);
        for (std::size_t c = 0; c < dy.size(); ++c) {
            gb2_(0, c) += dy[c];
            for (std::size_t j = 0; j < f1_.cols(); ++j) {
                gw2_(j, c) += f1_(last, j) * dy[c];
                dpre1[j] += w2_(j, c) * dy[c];
            }
        }
        for (std::size_t j = 0; j < dpre1.size(); ++j) {
            if (pre1_(last, j) <= 0.0) {
                dpre1[j] = 0.0;
            }
            gb1_(0, j) += dpre1[j];
        }
        for (std::size_t i = 0; i < w1_.rows(); ++i) {
            for (std::size_t j = 0; j < w1_.cols(); ++j) {
                gw1_(i, j) += z_(last, i) * dpre1[j];
                dz(last, i) += w1_(i, j) * dpre1[j];
            }
        }

        Matrix de = dz;
        gwo_ += matmul_at(a_, dz);
        const Matrix da = matmul_bt(dz, wo_);
        const auto g = neural::attention_backward(attn_cache_, da);
        gwq_ += matmul_at(e_, g.dq);
        gwk_ += matmul_at(e_, g.dk);
        gwv_ += matmul_at(e_, g.dv);
        de += matmul_bt(g.dq, wq_);
        de += matmul_bt(g.dk, wk_);
        de += matmul_bt(g.dv, wv_);
        embed_.backward(de);
    }

private:
    LstmLayer embed_;
    neural::AttentionConfig cfg_;
    Matrix pe_;
    Matrix wq_, wk_, wv_, wo_, w1_, b1_, w2_, b2_;
    Matrix gwq_, gwk_, gwv_, gwo_, gw1_, gb1_, gw2_, gb2_;
    neural::DenseParams head_p_, head_g_;
    neural::DenseCache head_cache_;
    neural::AttentionCache attn_cache_;
    Matrix e_, a_, z_, pre1_, f1_;
};

// ---------------------------------------------------------------------------
// Blob I/O

void write_f64(std::ostream& out, double value)
{
    auto bits = std::bit_cast<std::uint64_t>(value);
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    char bytes[8];
    std::memcpy(bytes, &bits, 8);
    out.write(bytes, 8);
}

double read_f64(const char* bytes)
{
    std::uint64_t bits = 0;
    std::memcpy(&bits, bytes, 8);
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    return std::bit_cast<double>(bits);
}

const char* to_string(neural::PeBase base)
{
    return base == neural::PeBase::conventional ? "conventional" : "input_length";
}

}  // namespace

// ---------------------------------------------------------------------------
// Names and specs

const char* to_string(ModelKind kind)
{
    switch (kind) {
    case ModelKind::dense:
        return "dense";
    case ModelKind::lstm:
        return "lstm";
    case ModelKind::gru:
        return "gru";
    case ModelKind::indrnn:
        return "indrnn";
    case ModelKind::transformer:
        return "transformer";
    }
    return "?";
}

ModelKind parse_model_kind(const std::string& text)
{
    const std::string lower = lowercase(text);
    for (auto kind : {ModelKind::dense, ModelKind::lstm, ModelKind::gru, ModelKind::indrnn, ModelKind::transformer}) {
        if (lower == to_string(kind)) {
            return kind;
        }
    }
    if (lower == "ann") {
        return ModelKind::dense;
    }
    throw ConfigError("unknown model kind '" + text + "'");
}

const char* to_string(Task task) { return task == Task::regression ? "regression" : "classification"; }

Task parse_task(const std::string& text)
{
    const std::string lower = lowercase(text);
    if (lower == "regression") {
        return Task::regression;
    }
    if (lower == "classification") {
        return Task::classification;
    }
    throw ConfigError("unknown task '" + text + "'");
}

void ModelSpec::validate() const
{
    const std::string who = std::string(to_string(kind)) + " spec: ";
    if (lookback == 0) {
        throw ConfigError(who + "lookback must be at least 1");
    }
    if (kind != ModelKind::dense && kind != ModelKind::transformer && layers.empty()) {
        throw ConfigError(who + "needs at least one hidden layer");
    }
    if (std::find(layers.begin(), layers.end(), std::size_t{0}) != layers.end()) {
        throw ConfigError(who + "layer sizes must be positive");
    }
    if (kind == ModelKind::transformer) {
        if (d_model == 0 || d_k == 0 || ff_hidden == 0) {
            throw ConfigError(who + "d_model, d_k and ff_hidden must be positive");
        }
        if (d_k > d_model) {
            throw ConfigError(who + "d_k exceeds d_model");
        }
        if (top_u && (*top_u == 0 || *top_u > lookback)) {
            throw ConfigError(who + "top_u must be in [1, lookback]");
        }
    }
    if (lr && !(*lr > 0.0 && std::isfinite(*lr))) {
        throw ConfigError(who + "learning rate must be positive");
    }
}

nlohmann::json to_json(const ModelSpec& spec)
{
    nlohmann::json j{
        {"kind", to_string(spec.kind)},
        {"layers", spec.layers},
        {"lookback", spec.lookback},
        {"task", to_string(spec.task)},
        {"seed", spec.seed},
    };
    if (spec.kind == ModelKind::transformer) {
        j["d_model"] = spec.d_model;
        j["d_k"] = spec.d_k;
        j["ff_hidden"] = spec.ff_hidden;
        j["probsparse"] = spec.probsparse;
        j["top_u"] = spec.top_u ? nlohmann::json(*spec.top_u) : nlohmann::json("auto");
        j["pe_base"] = to_string(spec.pe_base);
    }
    if (spec.lr) {
        j["lr"] = *spec.lr;
    }
    if (spec.epochs) {
        j["epochs"] = *spec.epochs;
    }
    return j;
}

ModelSpec model_spec_from_json(const nlohmann::json& j)
{
    if (!j.is_object()) {
        throw ConfigError("model spec must be a JSON object");
    }
    ModelSpec spec;
    try {
        if (!j.contains("kind")) {
            throw ConfigError("model spec is missing 'kind'");
        }
        spec.kind = parse_model_kind(j.at("kind").get<std::string>());
        if (spec.kind == ModelKind::transformer) {
            spec.layers.clear();
        }
        if (j.contains("layers")) {
            spec.layers = j.at("layers").get<std::vector<std::size_t>>();
        }
        spec.lookback = j.value("lookback", spec.lookback);
        if (j.contains("task")) {
            spec.task = parse_task(j.at("task").get<std::string>());
        }
        spec.seed = j.value("seed", spec.seed);
        spec.d_model = j.value("d_model", spec.d_model);
        spec.d_k = j.value("d_k", spec.d_model < spec.d_k ? spec.d_model : spec.d_k);
        spec.ff_hidden = j.value("ff_hidden", spec.ff_hidden);
        spec.probsparse = j.value("probsparse", spec.probsparse);
        if (j.contains("top_u") && !(j.at("top_u").is_string() && j.at("top_u").get<std::string>() == "auto")) {
            spec.top_u = j.at("top_u").get<std::size_t>();
        }
        if (j.contains("pe_base")) {
            const std::string base = lowercase(j.at("pe_base").get<std::string>());
            if (base == "conventional" || base == "10000") {
                spec.pe_base = neural::PeBase::conventional;
            } else if (base == "input_length") {
                spec.pe_base = neural::PeBase::input_length;
            } else {
                throw ConfigError("unknown pe_base '" + base + "'");
            }
        }
        if (j.contains("lr")) {
            spec.lr = j.at("lr").get<double>();
        }
        if (j.contains("epochs")) {
            spec.epochs = j.at("epochs").get<std::size_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------
// Network

double Network::forward(const Matrix& window)
{
    const double raw = forward_raw(window);
    last_output_ = task_ == Task::classification ? neural::sigmoid(raw) : raw;
    return last_output_;
}

void Network::backward(double d_output)
{
    const double d_raw =
        task_ == Task::classification ? d_output * last_output_ * (1.0 - last_output_) : d_output;
    backward_raw(d_raw);
}

void Network::zero_grad()
{
    for (const auto& g : grads_) {
        g.tensor->fill(0.0);
    }
}

void Network::register_tensors(std::vector<NamedTensor> params, std::vector<NamedTensor> grads)
{
    params_ = std::move(params);
    grads_ = std::move(grads);
}

std::unique_ptr<Network> make_network(const ModelSpec& spec, std::size_t features)
{
    spec.validate();
    if (features == 0) {
        throw ShapeError("network needs at least one input feature");
    }
    std::mt19937_64 rng(derive_seed(spec.seed, 0));
    switch (spec.kind) {
    case ModelKind::dense:
        return std::make_unique<DenseNet>(spec, features, rng);
    case ModelKind::lstm:
    case ModelKind::gru:
    case ModelKind::indrnn:
        return std::make_unique<RecurrentNet>(spec, features, rng);
    case ModelKind::transformer:
        return std::make_unique<TransformerNet>(spec, features, rng);
    }
    throw ConfigError("unknown model kind");
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const
{
    if (batch == 0) {
        throw ConfigError("batch size must be at least 1");
    }
    if (!(lr > 0.0 && std::isfinite(lr))) {
        throw ConfigError("learning rate must be positive");
    }
    if (!(clip_norm > 0.0)) {
        throw ConfigError("clip norm must be positive");
    }
    if (!(divergence_factor > 1.0)) {
        throw ConfigError("divergence factor must exceed 1");
    }
}

void Dataset::validate(std::size_t lookback) const
{
    if (windows.size() != targets.size()) {
        throw ShapeError(std::to_string(windows.size()) + " windows but " + std::to_string(targets.size()) +
                         " targets");
    }
    if (windows.empty()) {
        throw SizeError("training set is empty");
    }
    const std::size_t f = features();
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (windows[i].rows() != lookback || windows[i].cols() != f) {
            throw ShapeError("window " + std::to_string(i) + " is " + std::to_string(windows[i].rows()) + "x" +
                             std::to_string(windows[i].cols()) + ", expected " + std::to_string(lookback) + "x" +
                             std::to_string(f));
        }
        for (double x : windows[i].data()) {
            if (!std::isfinite(x)) {
                throw DomainError("window " + std::to_string(i) + " contains a non-finite value");
            }
        }
        if (!std::isfinite(targets[i])) {
            throw DomainError("target " + std::to_string(i) + " is not finite");
        }
    }
}

neural::LossKind default_loss(Task task)
{
    return task == Task::classification ? neural::LossKind::bce : neural::LossKind::logcosh;
}

TrainedModel::TrainedModel(ModelSpec spec, std::size_t features)
    : spec_(std::move(spec)), features_(features), net_(make_network(spec_, features))
{
}

double TrainedModel::predict(const Matrix& window) const
{
    if (window.rows() != spec_.lookback || window.cols() != features_) {
        throw ShapeError("prediction window is " + std::to_string(window.rows()) + "x" +
                         std::to_string(window.cols()) + ", model expects " + std::to_string(spec_.lookback) + "x" +
                         std::to_string(features_));
    }
    return net_->forward(window);
}

std::vector<double> TrainedModel::predict(std::span<const Matrix> windows) const
{
    std::vector<double> out;
    out.reserve(windows.size());
    for (const auto& w : windows) {
        out.push_back(predict(w));
    }
    return out;
}

std::vector<double> TrainedModel::flat_parameters() const
{
    std::vector<double> out;
    for (const auto& p : net_->params()) {
        out.insert(out.end(), p.tensor->data().begin(), p.tensor->data().end());
    }
    return out;
}

void TrainedModel::save(const std::filesystem::path& manifest, const std::filesystem::path& blob) const
{
    nlohmann::json index = nlohmann::json::array();
    std::ofstream bin(blob, std::ios::binary | std::ios::trunc);
    if (!bin) {
        throw IoError("cannot write " + blob.string());
    }
    std::size_t offset = 0;
    for (const auto& p : net_->params()) {
        index.push_back({{"name", p.name}, {"rows", p.tensor->rows()}, {"cols", p.tensor->cols()}, {"offset", offset}});
        for (double x : p.tensor->data()) {
            write_f64(bin, x);
        }
        offset += p.tensor->size() * 8;
    }
    bin.close();
    if (!bin) {
        throw IoError("failed writing " + blob.string());
    }

    nlohmann::json j{
        {"format", "wavestack-model"},
        {"version", 1},
        {"spec", to_json(spec_)},
        {"seed", spec_.seed},
        {"features", features_},
        {"loss_history", loss_history_},
        {"blob", blob.filename().string()},
        {"tensors", index},
    };
    std::ofstream out(manifest, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + manifest.string());
    }
    out << j.dump(2) << '\n';
}

TrainedModel TrainedModel::load(const std::filesystem::path& manifest)
{
    std::ifstream in(manifest);
    if (!in) {
        throw IoError("cannot read " + manifest.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(manifest.string() + ": " + e.what());
    }
    if (j.value("format", "") != "wavestack-model") {
        throw StructureError(manifest.string() + " is not a model manifest");
    }

    TrainedModel model(model_spec_from_json(j.at("spec")), j.at("features").get<std::size_t>());
    model.loss_history_ = j.at("loss_history").get<std::vector<double>>();

    const auto blob_path = manifest.parent_path() / j.at("blob").get<std::string>();
    std::ifstream bin(blob_path, std::ios::binary);
    if (!bin) {
        throw IoError("cannot read " + blob_path.string());
    }
    const std::string bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

    const auto& index = j.at("tensors");
    auto params = model.net_->params();
    if (index.size() != params.size()) {
        throw StructureError(manifest.string() + " lists " + std::to_string(index.size()) + " tensors, model has " +
                             std::to_string(params.size()));
    }
    for (std::size_t t = 0; t < params.size(); ++t) {
        const auto& entry = index[t];
        Matrix& m = *params[t].tensor;
        if (entry.at("name").get<std::string>() != params[t].name || entry.at("rows").get<std::size_t>() != m.rows() ||
            entry.at("cols").get<std::size_t>() != m.cols()) {
            throw StructureError(manifest.string() + ": tensor " + std::to_string(t) + " does not match " +
                                 params[t].name);
        }
        const auto offset = entry.at("offset").get<std::size_t>();
        if (offset + m.size() * 8 > bytes.size()) {
            throw StructureError(blob_path.string() + " is truncated");
        }
        auto data = m.data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            data[i] = read_f64(bytes.data() + offset + i * 8);
        }
    }
    return model;
}

TrainedModel train(const ModelSpec& spec, const Dataset& data, const TrainConfig& config)
{
    spec.validate();
    config.validate();
    data.validate(spec.lookback);

    const std::size_t epochs = spec.epochs.value_or(config.epochs);
    const auto loss_kind = config.loss.value_or(default_loss(spec.task));
    if (loss_kind == neural::LossKind::bce && spec.task == Task::regression) {
        throw ConfigError("bce loss requires a classification task");
    }
    if (spec.task == Task::classification) {
        for (double y : data.targets) {
            if (y != 0.0 && y != 1.0) {
                throw DomainError("classification targets must be 0 or 1");
            }
        }
    }

    TrainedModel model(spec, data.features());
    Network& net = *model.net_;
    neural::AdamState adam;
    adam.lr = spec.lr.value_or(config.lr);
    const auto params = net.params();
    const auto grads = net.grads();

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(derive_seed(spec.seed, 1));
    std::optional<double> reference;

    for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            const std::size_t stop = std::min(order.size(), start + config.batch);
            const double size = static_cast<double>(stop - start);
            net.zero_grad();
            double batch_loss = 0.0;
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t i = order[b];
                const double pred[] = {net.forward(data.windows[i])};
                const double target[] = {data.targets[i]};
                const auto lv = neural::loss(loss_kind, pred, target);
                batch_loss += lv.value;
                net.backward(lv.grad[0] / size);
            }
            batch_loss /= size;
            if (!std::isfinite(batch_loss) ||
                (reference && batch_loss > config.divergence_factor * std::max(*reference, 1.0))) {
                throw DivergenceError(std::string(to_string(spec.kind)) + " training diverged at epoch " +
                                      std::to_string(epoch) + " (batch loss " + std::to_string(batch_loss) + ")");
            }
            if (!reference) {
                reference = batch_loss;
            }
            if (spec.recurrent()) {
                neural::clip_gradients(grads, config.clip_norm);
            }
            adam.begin_step();
            for (std::size_t slot = 0; slot < params.size(); ++slot) {
                adam.update(slot, params[slot].tensor->data(), grads[slot].tensor->data());
            }
            epoch_sum += batch_loss * size;
        }
        model.loss_history_.push_back(epoch_sum / static_cast<double>(data.size()));
    }
    return model;
}

}  // namespace wavestack
