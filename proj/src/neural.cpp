#include "wavestack/neural.hpp"

#include "wavestack/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>

namespace wavestack::neural {

namespace {

void expect_size(const char* what, std::size_t got, std::size_t expected)
{
    if (got != expected) {
        throw ShapeError(std::string(what) + " has size " + std::to_string(got) + ", expected " +
                         std::to_string(expected));
    }
}

Vec affine(const Matrix& w, std::span<const double> x, const Matrix& u, std::span<const double> h, const Matrix& b)
{
    Vec a(b.data().begin(), b.data().end());
    matvec_add(w, x, a);
    matvec_add(u, h, a);
    return a;
}

void add_to(Matrix& m, std::span<const double> v)
{
    auto d = m.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
        d[i] += v[i];
    }
}

double activate(Activation act, double x)
{
    switch (act) {
    case Activation::identity:
        return x;
    case Activation::relu:
        return x > 0.0 ? x : 0.0;
    case Activation::sigmoid:
        return sigmoid(x);
    case Activation::tanh:
        return std::tanh(x);
    }
    return x;
}

double activate_grad(Activation act, double pre, double y)
{
    switch (act) {
    case Activation::identity:
        return 1.0;
    case Activation::relu:
        return pre > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid:
        return y * (1.0 - y);
    case Activation::tanh:
        return 1.0 - y * y;
    }
    return 1.0;
}

}  // namespace

double sigmoid(double x)
{
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void init_uniform(Matrix& m, std::size_t fan_in, std::mt19937_64& rng)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : m.data()) {
        x = dist(rng);
    }
}

// ---------------------------------------------------------------------------
// Dense

DenseParams DenseParams::zeros(std::size_t in, std::size_t out) { return {Matrix(out, in), Matrix(out, 1)}; }

DenseParams DenseParams::random(std::size_t in, std::size_t out, std::mt19937_64& rng)
{
    auto p = zeros(in, out);
    init_uniform(p.w, in, rng);
    return p;
}

std::vector<NamedTensor> DenseParams::tensors(const std::string& prefix)
{
    return {{prefix + "w", &w}, {prefix + "b", &b}};
}

Vec dense_forward(const DenseParams& p, std::span<const double> x, Activation act, DenseCache* cache)
{
    expect_size("dense input", x.size(), p.in());
    Vec pre(p.b.data().begin(), p.b.data().end());
    matvec_add(p.w, x, pre);
    Vec y(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) {
        y[i] = activate(act, pre[i]);
    }
    if (cache != nullptr) {
        cache->x.assign(x.begin(), x.end());
        cache->pre = pre;
        cache->y = y;
    }
    return y;
}

Vec dense_backward(const DenseParams& p, const DenseCache& cache, Activation act, std::span<const double> dy,
                   DenseParams& grads)
{
    expect_size("dense output gradient", dy.size(), p.out());
    Vec da(dy.size());
    for (std::size_t i = 0; i < dy.size(); ++i) {
        da[i] = dy[i] * activate_grad(act, cache.pre[i], cache.y[i]);
    }
    outer_add(grads.w, da, cache.x);
    add_to(grads.b, da);
    Vec dx(p.in(), 0.0);
    matvec_t_add(p.w, da, dx);
    return dx;
}

// ---------------------------------------------------------------------------
// LSTM

LstmParams LstmParams::zeros(std::size_t input, std::size_t hidden)
{
    LstmParams p;
    for (Matrix* w : {&p.w_f, &p.w_i, &p.w_o, &p.w_c}) {
        *w = Matrix(hidden, input);
    }
    for (Matrix* u : {&p.u_f, &p.u_i, &p.u_o, &p.u_c}) {
        *u = Matrix(hidden, hidden);
    }
    for (Matrix* b : {&p.b_f, &p.b_i, &p.b_o, &p.b_c}) {
        *b = Matrix(hidden, 1);
    }
    return p;
}

LstmParams LstmParams::random(std::size_t input, std::size_t hidden, std::mt19937_64& rng)
{
    auto p = zeros(input, hidden);
    for (Matrix* w : {&p.w_f, &p.w_i, &p.w_o, &p.w_c}) {
        init_uniform(*w, input, rng);
    }
    for (Matrix* u : {&p.u_f, &p.u_i, &p.u_o, &p.u_c}) {
        init_uniform(*u, hidden, rng);
    }
    return p;
}

std::vector<NamedTensor> LstmParams::tensors(const std::string& prefix)
{
    return {{prefix + "w_f", &w_f}, {prefix + "w_i", &w_i}, {prefix + "w_o", &w_o}, {prefix + "w_c", &w_c},
            {prefix + "u_f", &u_f}, {prefix + "u_i", &u_i}, {prefix + "u_o", &u_o}, {prefix + "u_c", &u_c},
            {prefix + "b_f", &b_f}, {prefix + "b_i", &b_i}, {prefix + "b_o", &b_o}, {prefix + "b_c", &b_c}};
}

LstmState lstm_step(const LstmParams& p, std::span<const double> x, std::span<const double> h_prev,
                    std::span<const double> c_prev, LstmCache* cache)
{
    const std::size_t m = p.hidden_size();
    expect_size("lstm input", x.size(), p.input_size());
    expect_size("lstm h_prev", h_prev.size(), m);
    expect_size("lstm c_prev", c_prev.size(), m);

    Vec f = affine(p.w_f, x, p.u_f, h_prev, p.b_f);
    Vec i = affine(p.w_i, x, p.u_i, h_prev, p.b_i);
    Vec o = affine(p.w_o, x, p.u_o, h_prev, p.b_o);
    Vec g = affine(p.w_c, x, p.u_c, h_prev, p.b_c);
    LstmState out{Vec(m), Vec(m)};
    Vec tanh_c(m);
    for (std::size_t k = 0; k < m; ++k) {
        f[k] = sigmoid(f[k]);
        i[k] = sigmoid(i[k]);
        o[k] = sigmoid(o[k]);
        g[k] = std::tanh(g[k]);
        out.c[k] = f[k] * c_prev[k] + i[k] * g[k];
        tanh_c[k] = std::tanh(out.c[k]);
        out.h[k] = o[k] * tanh_c[k];
    }
    if (cache != nullptr) {
        cache->x.assign(x.begin(), x.end());
        cache->h_prev.assign(h_prev.begin(), h_prev.end());
        cache->c_prev.assign(c_prev.begin(), c_prev.end());
        cache->f = std::move(f);
        cache->i = std::move(i);
        cache->o = std::move(o);
        cache->g = std::move(g);
        cache->c = out.c;
        cache->tanh_c = std::move(tanh_c);
    }
    return out;
}

LstmStepGrad lstm_step_backward(const LstmParams& p, const LstmCache& cache, std::span<const double> dh,
                                std::span<const double> dc, LstmParams& grads)
{
    const std::size_t m = p.hidden_size();
    expect_size("lstm dh", dh.size(), m);
    expect_size("lstm dc", dc.size(), m);

    Vec da_f(m), da_i(m), da_o(m), da_g(m);
    LstmStepGrad out{Vec(p.input_size(), 0.0), Vec(m, 0.0), Vec(m)};
    for (std::size_t k = 0; k < m; ++k) {
        const double tc = cache.tanh_c[k];
        const double dc_total = dc[k] + dh[k] * cache.o[k] * (1.0 - tc * tc);
        const double f = cache.f[k];
        const double i = cache.i[k];
        const double o = cache.o[k];
        const double g = cache.g[k];
        da_o[k] = dh[k] * tc * o * (1.0 - o);
        da_f[k] = dc_total * cache.c_prev[k] * f * (1.0 - f);
        da_i[k] = dc_total * g * i * (1.0 - i);
        da_g[k] = dc_total * i * (1.0 - g * g);
        out.dc_prev[k] = dc_total * f;
    }
    const std::pair<const Vec*, std::array<Matrix*, 3>> gates[] = {
        {&da_f, {&grads.w_f, &grads.u_f, &grads.b_f}},
        {&da_i, {&grads.w_i, &grads.u_i, &grads.b_i}},
        {&da_o, {&grads.w_o, &grads.u_o, &grads.b_o}},
        {&da_g, {&grads.w_c, &grads.u_c, &grads.b_c}},
    };
    const std::array<std::pair<const Matrix*, const Matrix*>, 4> weights = {
        std::pair{&p.w_f, &p.u_f}, std::pair{&p.w_i, &p.u_i}, std::pair{&p.w_o, &p.u_o}, std::pair{&p.w_c, &p.u_c}};
    for (std::size_t gi = 0; gi < 4; ++gi) {
        const Vec& da = *gates[gi].first;
        outer_add(*gates[gi].second[0], da, cache.x);
        outer_add(*gates[gi].second[1], da, cache.h_prev);
        add_to(*gates[gi].second[2], da);
        matvec_t_add(*weights[gi].first, da, out.dx);
        matvec_t_add(*weights[gi].second, da, out.dh_prev);
    }
    return out;
}

// ---------------------------------------------------------------------------
// GRU

GruParams GruParams::zeros(std::size_t input, std::size_t hidden)
{
    GruParams p;
    for (Matrix* w : {&p.w_z, &p.w_r, &p.w_h}) {
        *w = Matrix(hidden, input);
    }
    for (Matrix* u : {&p.u_z, &p.u_r, &p.u_h}) {
        *u = Matrix(hidden, hidden);
    }
    for (Matrix* b : {&p.b_z, &p.b_r, &p.b_h}) {
        *b = Matrix(hidden, 1);
    }
    return p;
}

GruParams GruParams::random(std::size_t input, std::size_t hidden, std::mt19937_64& rng)
{
    auto p = zeros(input, hidden);
    for (Matrix* w : {&p.w_z, &p.w_r, &p.w_h}) {
        init_uniform(*w, input, rng);
    }
    for (Matrix* u : {&p.u_z, &p.u_r, &p.u_h}) {
        init_uniform(*u, hidden, rng);
    }
    return p;
}

std::vector<NamedTensor> GruParams::tensors(const std::string& prefix)
{
    return {{prefix + "w_z", &w_z}, {prefix + "w_r", &w_r}, {prefix + "w_h", &w_h},
            {prefix + "u_z", &u_z}, {prefix + "u_r", &u_r}, {prefix + "u_h", &u_h},
            {prefix + "b_z", &b_z}, {prefix + "b_r", &b_r}, {prefix + "b_h", &b_h}};
}

Vec gru_step(const GruParams& p, std::span<const double> x, std::span<const double> h_prev, GruCache* cache)
{
    const std::size_t m = p.hidden_size();
    expect_size("gru input", x.size(), p.input_size());
    expect_size("gru h_prev", h_prev.size(), m);

    Vec z = affine(p.w_z, x, p.u_z, h_prev, p.b_z);
    Vec r = affine(p.w_r, x, p.u_r, h_prev, p.b_r);
    Vec rh(m);
    for (std::size_t k = 0; k < m; ++k) {
        z[k] = sigmoid(z[k]);
        r[k] = sigmoid(r[k]);
        rh[k] = r[k] * h_prev[k];
    }
    Vec cand = affine(p.w_h, x, p.u_h, rh, p.b_h);
    Vec h(m);
    for (std::size_t k = 0; k < m; ++k) {
        cand[k] = std::tanh(cand[k]);
        h[k] = z[k] * cand[k] + (1.0 - z[k]) * h_prev[k];
    }
    if (cache != nullptr) {
        cache->x.assign(x.begin(), x.end());
        cache->h_prev.assign(h_prev.begin(), h_prev.end());
        cache->z = std::move(z);
        cache->r = std::move(r);
        cache->rh = std::move(rh);
        cache->cand = std::move(cand);
        cache->h = h;
    }
    return h;
}

StepGrad gru_step_backward(const GruParams& p, const GruCache& cache, std::span<const double> dh, GruParams& grads)
{
    const std::size_t m = p.hidden_size();
    expect_size("gru dh", dh.size(), m);

    StepGrad out{Vec(p.input_size(), 0.0), Vec(m, 0.0)};
    Vec da_z(m), da_h(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double z = cache.z[k];
        const double cand = cache.cand[k];
        da_z[k] = dh[k] * (cand - cache.h_prev[k]) * z * (1.0 - z);
        da_h[k] = dh[k] * z * (1.0 - cand * cand);
        out.dh_prev[k] = dh[k] * (1.0 - z);
    }
    outer_add(grads.w_h, da_h, cache.x);
    outer_add(grads.u_h, da_h, cache.rh);
    add_to(grads.b_h, da_h);
    matvec_t_add(p.w_h, da_h, out.dx);
    Vec d_rh(m, 0.0);
    matvec_t_add(p.u_h, da_h, d_rh);

    Vec da_r(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double r = cache.r[k];
        da_r[k] = d_rh[k] * cache.h_prev[k] * r * (1.0 - r);
        out.dh_prev[k] += d_rh[k] * r;
    }
    outer_add(grads.w_z, da_z, cache.x);
    outer_add(grads.u_z, da_z, cache.h_prev);
    add_to(grads.b_z, da_z);
    outer_add(grads.w_r, da_r, cache.x);
    outer_add(grads.u_r, da_r, cache.h_prev);
    add_to(grads.b_r, da_r);
    matvec_t_add(p.w_z, da_z, out.dx);
    matvec_t_add(p.w_r, da_r, out.dx);
    matvec_t_add(p.u_z, da_z, out.dh_prev);
    matvec_t_add(p.u_r, da_r, out.dh_prev);
    return out;
}

// ---------------------------------------------------------------------------
// IndRNN

IndRnnParams IndRnnParams::zeros(std::size_t input, std::size_t hidden)
{
    return {Matrix(hidden, input), Matrix(hidden, 1), Matrix(hidden, 1)};
}

IndRnnParams IndRnnParams::random(std::size_t input, std::size_t hidden, std::mt19937_64& rng)
{
    auto p = zeros(input, hidden);
    init_uniform(p.w, input, rng);
    init_uniform(p.u, 1, rng);
    return p;
}

std::vector<NamedTensor> IndRnnParams::tensors(const std::string& prefix)
{
    return {{prefix + "w", &w}, {prefix + "u", &u}, {prefix + "b", &b}};
}

Vec indrnn_step(const IndRnnParams& p, std::span<const double> x, std::span<const double> h_prev, IndRnnCache* cache)
{
    const std::size_t m = p.hidden_size();
    expect_size("indrnn input", x.size(), p.input_size());
    expect_size("indrnn h_prev", h_prev.size(), m);
    if (p.u.size() != m || p.b.size() != m) {
        throw ShapeError("indrnn recurrent vector and bias must have " + std::to_string(m) + " entries");
    }

    Vec pre(p.b.data().begin(), p.b.data().end());
    matvec_add(p.w, x, pre);
    Vec h(m);
    for (std::size_t k = 0; k < m; ++k) {
        pre[k] += p.u.data()[k] * h_prev[k];
        h[k] = pre[k] > 0.0 ? pre[k] : 0.0;
    }
    if (cache != nullptr) {
        cache->x.assign(x.begin(), x.end());
        cache->h_prev.assign(h_prev.begin(), h_prev.end());
        cache->pre = std::move(pre);
        cache->h = h;
    }
    return h;
}

StepGrad indrnn_step_backward(const IndRnnParams& p, const IndRnnCache& cache, std::span<const double> dh,
                              IndRnnParams& grads)
{
    const std::size_t m = p.hidden_size();
    expect_size("indrnn dh", dh.size(), m);
    StepGrad out{Vec(p.input_size(), 0.0), Vec(m)};
    Vec da(m);
    for (std::size_t k = 0; k < m; ++k) {
        da[k] = cache.pre[k] > 0.0 ? dh[k] : 0.0;
        grads.u.data()[k] += da[k] * cache.h_prev[k];
        out.dh_prev[k] = da[k] * p.u.data()[k];
    }
    outer_add(grads.w, da, cache.x);
    add_to(grads.b, da);
    matvec_t_add(p.w, da, out.dx);
    return out;
}

// ---------------------------------------------------------------------------
// Attention

Matrix positional_encoding(std::size_t length, std::size_t d_model, PeBase base)
{
    if (length == 0 || d_model == 0) {
        throw ShapeError("positional encoding needs length and d_model > 0");
    }
    const double b = base == PeBase::conventional ? 10000.0 : 2.0 * static_cast<double>(length);
    Matrix pe(length, d_model);
    for (std::size_t pos = 0; pos < length; ++pos) {
        for (std::size_t col = 0; col < d_model; ++col) {
            const double exponent = static_cast<double>(col - col % 2) / static_cast<double>(d_model);
            const double angle = static_cast<double>(pos) / std::pow(b, exponent);
            pe(pos, col) = col % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

void AttentionConfig::validate() const
{
    if (d_k == 0 || d_model == 0) {
        throw ConfigError("attention dimensions must be positive");
    }
    if (d_k > d_model) {
        throw ConfigError("attention d_k " + std::to_string(d_k) + " exceeds d_model " + std::to_string(d_model));
    }
    if (heads != 1) {
        throw ConfigError("only single-head attention is supported");
    }
    if (top_u && *top_u == 0) {
        throw ConfigError("top_u must be at least 1");
    }
}

std::size_t auto_top_u(std::size_t queries)
{
    if (queries == 0) {
        return 0;
    }
    const auto u = static_cast<std::size_t>(std::ceil(5.0 * std::log(static_cast<double>(queries))));
    return std::clamp<std::size_t>(u, 1, queries);
}

Matrix softmax_rows(const Matrix& scores)
{
    Matrix out(scores.rows(), scores.cols());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        const auto s = scores.row(i);
        auto o = out.row(i);
        const double mx = *std::max_element(s.begin(), s.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < s.size(); ++j) {
            o[j] = std::exp(s[j] - mx);
            sum += o[j];
        }
        for (double& x : o) {
            x /= sum;
        }
    }
    return out;
}

namespace {

void check_qkv(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t d_k)
{
    if (q.rows() == 0 || k.rows() == 0 || q.cols() == 0) {
        throw ShapeError("attention needs at least one query and one key");
    }
    if (q.cols() != k.cols()) {
        throw ShapeError("query width " + std::to_string(q.cols()) + " differs from key width " +
                         std::to_string(k.cols()));
    }
    if (k.rows() != v.rows()) {
        throw ShapeError("key count " + std::to_string(k.rows()) + " differs from value count " +
                         std::to_string(v.rows()));
    }
    if (d_k == 0) {
        throw ShapeError("d_k must be positive");
    }
}

Matrix scaled_scores(const Matrix& q, const Matrix& k, double scale)
{
    Matrix s = matmul_bt(q, k);
    for (double& x : s.data()) {
        x *= scale;
    }
    return s;
}

}  // namespace

Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t d_k, AttentionCache* cache)
{
    check_qkv(q, k, v, d_k);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_k));
    Matrix weights = softmax_rows(scaled_scores(q, k, scale));
    Matrix out = matmul(weights, v);
    if (cache != nullptr) {
        *cache = AttentionCache{q, k, v, std::move(weights), std::vector<bool>(q.rows(), true), scale};
    }
    return out;
}

Vec sparsity_measure(const Matrix& q, const Matrix& k, std::size_t d_k)
{
    check_qkv(q, k, k, d_k);
    const Matrix s = scaled_scores(q, k, 1.0 / std::sqrt(static_cast<double>(d_k)));
    Vec m(q.rows());
    for (std::size_t i = 0; i < s.rows(); ++i) {
        const auto row = s.row(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        double mean = 0.0;
        for (double x : row) {
            sum += std::exp(x - mx);
            mean += x;
        }
        m[i] = mx + std::log(sum) - mean / static_cast<double>(row.size());
    }
    return m;
}

std::vector<std::size_t> top_queries(std::span<const double> measure, std::size_t u)
{
    std::vector<std::size_t> order(measure.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return measure[a] > measure[b]; });
    order.resize(std::min(u, order.size()));
    std::sort(order.begin(), order.end());
    return order;
}

Matrix probsparse_attention(const Matrix& q, const Matrix& k, const Matrix& v, const AttentionConfig& cfg,
                            AttentionCache* cache)
{
    cfg.validate();
    check_qkv(q, k, v, cfg.d_k);
    if (q.cols() != cfg.d_k) {
        throw ShapeError("query width " + std::to_string(q.cols()) + " differs from d_k " + std::to_string(cfg.d_k));
    }
    const std::size_t u = cfg.top_u.value_or(auto_top_u(q.rows()));
    if (u > q.rows()) {
        throw ConfigError("top_u " + std::to_string(u) + " exceeds query count " + std::to_string(q.rows()));
    }

    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_k));
    std::vector<bool> active(q.rows(), false);
    for (std::size_t i : top_queries(sparsity_measure(q, k, cfg.d_k), u)) {
        active[i] = true;
    }

    const Matrix full = softmax_rows(scaled_scores(q, k, scale));
    Matrix weights(q.rows(), k.rows());
    const double uniform = 1.0 / static_cast<double>(k.rows());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        auto w = weights.row(i);
        if (active[i]) {
            std::copy(full.row(i).begin(), full.row(i).end(), w.begin());
        } else {
            std::fill(w.begin(), w.end(), uniform);
        }
    }
    Matrix out = matmul(weights, v);
    if (cache != nullptr) {
        *cache = AttentionCache{q, k, v, std::move(weights), std::move(active), scale};
    }
    return out;
}

AttentionGrad attention_backward(const AttentionCache& cache, const Matrix& d_out)
{
    if (d_out.rows() != cache.q.rows() || d_out.cols() != cache.v.cols()) {
        throw ShapeError("attention output gradient shape mismatch");
    }
    const Matrix& a = cache.weights;
    AttentionGrad g;
    g.dv = matmul_at(a, d_out);
    Matrix da = matmul_bt(d_out, cache.v);
    Matrix ds(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        if (!cache.active[i]) {
            continue;
        }
        double dot = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            dot += a(i, j) * da(i, j);
        }
        for (std::size_t j = 0; j < a.cols(); ++j) {
            ds(i, j) = a(i, j) * (da(i, j) - dot) * cache.scale;
        }
    }
    g.dq = matmul(ds, cache.k);
    g.dk = matmul_at(ds, cache.q);
    return g;
}

// ---------------------------------------------------------------------------
// Losses

const char* to_string(LossKind kind)
{
    switch (kind) {
    case LossKind::mse:
        return "mse";
    case LossKind::logcosh:
        return "logcosh";
    case LossKind::bce:
        return "bce";
    }
    return "?";
}

LossKind parse_loss(const std::string& text)
{
    std::string lower;
    for (char c : text) {
        lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (lower == "mse") {
        return LossKind::mse;
    }
    if (lower == "logcosh") {
        return LossKind::logcosh;
    }
    if (lower == "bce") {
        return LossKind::bce;
    }
    throw ConfigError("unknown loss '" + text + "'");
}

namespace {

void check_pair(std::span<const double> a, std::span<const double> b)
{
    if (a.empty() || a.size() != b.size()) {
        throw ShapeError("loss inputs must be non-empty and equal length (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
    }
}

}  // namespace

LossValue mse(std::span<const double> pred, std::span<const double> target)
{
    check_pair(pred, target);
    const double n = static_cast<double>(pred.size());
    LossValue out{0.0, Vec(pred.size())};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - target[i];
        out.value += e * e;
        out.grad[i] = 2.0 * e / n;
    }
    out.value /= n;
    return out;
}

LossValue logcosh(std::span<const double> pred, std::span<const double> target)
{
    check_pair(pred, target);
    const double n = static_cast<double>(pred.size());
    LossValue out{0.0, Vec(pred.size())};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - target[i];
        const double a = std::abs(e);
        out.value += a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
        out.grad[i] = std::tanh(e) / n;
    }
    out.value /= n;
    return out;
}

LossValue bce(std::span<const double> prob, std::span<const double> label)
{
    check_pair(prob, label);
    constexpr double eps = 1e-7;
    const double n = static_cast<double>(prob.size());
    LossValue out{0.0, Vec(prob.size())};
    for (std::size_t i = 0; i < prob.size(); ++i) {
        const double p = std::clamp(prob[i], eps, 1.0 - eps);
        const double y = label[i];
        out.value -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        out.grad[i] = (p - y) / (p * (1.0 - p)) / n;
    }
    out.value /= n;
    return out;
}

LossValue loss(LossKind kind, std::span<const double> pred, std::span<const double> target)
{
    switch (kind) {
    case LossKind::mse:
        return mse(pred, target);
    case LossKind::logcosh:
        return logcosh(pred, target);
    case LossKind::bce:
        return bce(pred, target);
    }
    throw ConfigError("unknown loss");
}

// ---------------------------------------------------------------------------
// Adam

void AdamState::begin_step() { ++step; }

void AdamState::update(std::size_t slot, std::span<double> params, std::span<const double> grads)
{
    expect_size("adam gradient", grads.size(), params.size());
    if (step == 0) {
        throw ConfigError("adam update before begin_step");
    }
    if (m.size() <= slot) {
        m.resize(slot + 1);
        v.resize(slot + 1);
    }
    if (m[slot].empty()) {
        m[slot].assign(params.size(), 0.0);
        v[slot].assign(params.size(), 0.0);
    }
    expect_size("adam moment buffer", m[slot].size(), params.size());
    const double t = static_cast<double>(step);
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        m[slot][i] = beta1 * m[slot][i] + (1.0 - beta1) * g;
        v[slot][i] = beta2 * v[slot][i] + (1.0 - beta2) * g * g;
        const double m_hat = m[slot][i] / c1;
        const double v_hat = v[slot][i] / c2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads)
{
    state.begin_step();
    state.update(0, params, grads);
}

double clip_gradients(std::span<const NamedTensor> grads, double max_norm)
{
    double sq = 0.0;
    for (const auto& g : grads) {
        for (double x : g.tensor->data()) {
            sq += x * x;
        }
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double factor = max_norm / norm;
        for (const auto& g : grads) {
            for (double& x : g.tensor->data()) {
                x *= factor;
            }
        }
    }
    return norm;
}

}  // namespace wavestack::neural
