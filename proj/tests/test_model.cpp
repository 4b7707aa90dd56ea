#include "doctest.h"
#include "oracles.hpp"

#include "wavestack/error.hpp"
#include "wavestack/model.hpp"

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

using namespace wavestack;
using namespace wavestack::neural;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(r, c);
    for (auto& v : m.data()) {
        v = n(rng);
    }
    return m;
}

Matrix naive_attention(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t d_k)
{
    Matrix out(q.rows(), v.cols());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        std::vector<double> s(k.rows());
        double top = -INFINITY;
        for (std::size_t j = 0; j < k.rows(); ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < q.cols(); ++c) {
                dot += q(i, c) * k(j, c);
            }
            s[j] = dot / std::sqrt(static_cast<double>(d_k));
            top = std::max(top, s[j]);
        }
        double z = 0.0;
        for (auto& e : s) {
            e = std::exp(e - top);
            z += e;
        }
        for (std::size_t j = 0; j < k.rows(); ++j) {
            for (std::size_t c = 0; c < v.cols(); ++c) {
                out(i, c) += s[j] / z * v(j, c);
            }
        }
    }
    return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b)
{
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    }
    return worst;
}

Dataset linear_dataset(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = u(rng);
        d.windows.push_back(Matrix{{x}});
        d.targets.push_back(2.0 * x);
    }
    return d;
}

ModelSpec linear_spec()
{
    ModelSpec spec;
    spec.kind = ModelKind::dense;
    spec.layers = {};
    spec.lookback = 1;
    spec.seed = 3;
    return spec;
}

}  // namespace

TEST_CASE("lstm cell examples")
{
    const auto zero = LstmParams::zeros(3, 2);
    const auto s = lstm_step(zero, std::vector<double>{1, 2, 3}, std::vector<double>{0, 0}, std::vector<double>{0, 0});
    CHECK(s.h == Vec{0, 0});
    CHECK(s.c == Vec{0, 0});

    auto sat = LstmParams::zeros(2, 2);
    sat.b_f.fill(50.0);
    const auto t = lstm_step(sat, std::vector<double>{0.3, -0.2}, std::vector<double>{0, 0},
                             std::vector<double>{1.5, -2.0});
    CHECK(std::abs(t.c[0] - 1.5) < 1e-9);
    CHECK(std::abs(t.c[1] + 2.0) < 1e-9);
    CHECK_THROWS_AS(lstm_step(zero, std::vector<double>{1, 2}, std::vector<double>{0, 0}, std::vector<double>{0, 0}),
                    ShapeError);
}

TEST_CASE("gru cell examples")
{
    const auto zero = GruParams::zeros(2, 3);
    const auto h = gru_step(zero, std::vector<double>{4, 5}, std::vector<double>{2, -4, 1});
    CHECK(h == Vec{1, -2, 0.5});

    std::mt19937_64 rng(8);
    auto sat = GruParams::random(2, 3, rng);
    sat.w_z.fill(0.0);
    sat.u_z.fill(0.0);
    sat.b_z.fill(50.0);
    GruCache cache;
    const auto g = gru_step(sat, std::vector<double>{0.4, 0.1}, std::vector<double>{0.7, -0.3, 0.2}, &cache);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(g[i] - cache.cand[i]) < 1e-12);
    }
}

TEST_CASE("indrnn cell examples")
{
    std::mt19937_64 rng(9);
    auto p = IndRnnParams::random(3, 4, rng);
    p.u.fill(0.0);
    const std::vector<double> x{0.5, -1.0, 2.0};
    const auto h = indrnn_step(p, x, std::vector<double>{9, 9, 9, 9});
    for (std::size_t i = 0; i < 4; ++i) {
        double pre = p.b(i, 0);
        for (std::size_t j = 0; j < 3; ++j) {
            pre += p.w(i, j) * x[j];
        }
        CHECK(h[i] == doctest::Approx(std::max(pre, 0.0)).epsilon(1e-15));
    }

    auto id = IndRnnParams::zeros(3, 2);
    id.u.fill(1.0);
    CHECK(indrnn_step(id, std::vector<double>{0, 0, 0}, std::vector<double>{0.25, 3.0}) == Vec{0.25, 3.0});
}

TEST_CASE("indrnn gradient matches the closed-form product")
{
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double x[3] = {u(rng), u(rng), u(rng)};
        const auto r = oracle::indrnn_unroll(u(rng), 1.5 * u(rng), 0.5, x, std::abs(u(rng)));
        for (int t = 0; t < 3; ++t) {
            CHECK(std::abs(r.analytic_dh[t] - r.closed_form_dh[t]) < 1e-10);
        }
    }
}

TEST_CASE("positional encoding")
{
    const auto pe = positional_encoding(4, 2);
    CHECK(pe(0, 0) == 0.0);
    CHECK(pe(0, 1) == 1.0);
    CHECK(pe(1, 0) == doctest::Approx(std::sin(1.0)).epsilon(1e-15));
    CHECK(pe(1, 1) == doctest::Approx(std::cos(1.0)).epsilon(1e-15));
    const auto big = positional_encoding(30, 8);
    for (double v : big.data()) {
        CHECK(std::abs(v) <= 1.0);
    }
    const auto conv = positional_encoding(3, 4, PeBase::conventional);
    CHECK(conv(1, 2) == doctest::Approx(std::sin(1.0 / 100.0)).epsilon(1e-15));
    CHECK_THROWS_AS(positional_encoding(0, 4), ShapeError);
}

TEST_CASE("attention")
{
    std::mt19937_64 rng(12);
    const auto v1 = random_matrix(1, 3, rng);
    const auto one = attention(random_matrix(4, 2, rng), random_matrix(1, 2, rng), v1, 2);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(one(i, c) == doctest::Approx(v1(0, c)).epsilon(1e-15));
        }
    }

    const Matrix q{{1, 0}, {2, 0}};
    const Matrix k{{0, 1}, {0, -3}, {0, 2}};
    const Matrix v{{1, 10}, {2, 20}, {6, 0}};
    const auto mean = attention(q, k, v, 2);
    CHECK(mean(0, 0) == doctest::Approx(3.0));
    CHECK(mean(1, 1) == doctest::Approx(10.0));

    for (int trial = 0; trial < 20; ++trial) {
        const auto qq = random_matrix(4, 8, rng);
        const auto kk = random_matrix(4, 8, rng);
        const auto vv = random_matrix(4, 8, rng);
        AttentionCache cache;
        const auto out = attention(qq, kk, vv, 8, &cache);
        CHECK(max_abs_diff(out, naive_attention(qq, kk, vv, 8)) < 1e-12);
        for (std::size_t i = 0; i < 4; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < 4; ++j) {
                row += cache.weights(i, j);
            }
            CHECK(std::abs(row - 1.0) < 1e-12);
            for (std::size_t c = 0; c < 8; ++c) {
                double lo = INFINITY, hi = -INFINITY;
                for (std::size_t j = 0; j < 4; ++j) {
                    lo = std::min(lo, vv(j, c));
                    hi = std::max(hi, vv(j, c));
                }
                CHECK(out(i, c) >= lo - 1e-12);
                CHECK(out(i, c) <= hi + 1e-12);
            }
        }
    }
    CHECK_THROWS_AS(attention(Matrix(2, 3), Matrix(2, 2), Matrix(2, 2), 2), ShapeError);
}

TEST_CASE("probsparse attention")
{
    std::mt19937_64 rng(13);
    AttentionConfig cfg;
    cfg.d_model = 4;
    cfg.d_k = 4;
    cfg.probsparse = true;

    SUBCASE("all queries kept equals full attention")
    {
        for (int trial = 0; trial < 20; ++trial) {
            const auto q = random_matrix(6, 4, rng);
            const auto k = random_matrix(6, 4, rng);
            const auto v = random_matrix(6, 3, rng);
            cfg.top_u = 6;
            CHECK(max_abs_diff(probsparse_attention(q, k, v, cfg), attention(q, k, v, 4)) < 1e-12);
        }
    }
    SUBCASE("identical queries tie to the lowest indices")
    {
        const Matrix q(5, 4, 0.3);
        const auto k = random_matrix(5, 4, rng);
        const auto m = sparsity_measure(q, k, 4);
        for (double x : m) {
            CHECK(x == m[0]);
        }
        CHECK(top_queries(m, 2) == std::vector<std::size_t>{0, 1});
    }
    SUBCASE("selected set matches exhaustive ranking")
    {
        for (int trial = 0; trial < 10; ++trial) {
            const auto q = random_matrix(8, 4, rng);
            const auto k = random_matrix(8, 4, rng);
            const auto v = random_matrix(8, 2, rng);
            std::vector<double> m(8);
            for (std::size_t i = 0; i < 8; ++i) {
                double lse = 0.0, mean = 0.0;
                for (std::size_t j = 0; j < 8; ++j) {
                    double s = 0.0;
                    for (std::size_t c = 0; c < 4; ++c) {
                        s += q(i, c) * k(j, c);
                    }
                    s /= 2.0;
                    lse += std::exp(s);
                    mean += s / 8.0;
                }
                m[i] = std::log(lse) - mean;
                CHECK(sparsity_measure(q, k, 4)[i] == doctest::Approx(m[i]).epsilon(1e-12));
            }
            std::vector<std::size_t> order(8);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return m[a] > m[b]; });
            std::vector<std::size_t> expect(order.begin(), order.begin() + 3);
            std::sort(expect.begin(), expect.end());
            cfg.top_u = 3;
            AttentionCache cache;
            probsparse_attention(q, k, v, cfg, &cache);
            std::vector<std::size_t> active;
            for (std::size_t i = 0; i < 8; ++i) {
                if (cache.active[i]) {
                    active.push_back(i);
                }
            }
            CHECK(active == expect);
        }
    }
    SUBCASE("preconditions")
    {
        cfg.top_u = 7;
        CHECK_THROWS_AS(probsparse_attention(random_matrix(6, 4, rng), random_matrix(6, 4, rng),
                                             random_matrix(6, 3, rng), cfg),
                        ConfigError);
        CHECK(auto_top_u(1) == 1);
        CHECK(auto_top_u(30) == 18);
        CHECK(auto_top_u(4) == 4);
    }
}

TEST_CASE("losses")
{
    const std::vector<double> y{0.3, -1.2, 4.0};
    for (auto kind : {LossKind::mse, LossKind::logcosh}) {
        const auto l = loss(kind, y, y);
        CHECK(l.value == 0.0);
        CHECK(l.grad == Vec{0, 0, 0});
    }
    const std::vector<double> p{20.0};
    const std::vector<double> z{0.0};
    CHECK(std::abs(logcosh(p, z).value - (20.0 - std::log(2.0))) < 1e-6);
    CHECK(bce(std::vector<double>{0.5}, std::vector<double>{1.0}).value == doctest::Approx(std::log(2.0)));
    CHECK(bce(std::vector<double>{0.5}, std::vector<double>{0.0}).value == doctest::Approx(std::log(2.0)));
    CHECK(std::isfinite(bce(std::vector<double>{0.0}, std::vector<double>{1.0}).value));
    CHECK(parse_loss("logcosh") == LossKind::logcosh);
    CHECK_THROWS_AS(parse_loss("huber"), ConfigError);
    CHECK_THROWS_AS(mse(std::vector<double>{1}, std::vector<double>{1, 2}), ShapeError);
}

TEST_CASE("adam")
{
    AdamState s;
    s.lr = 0.1;
    std::vector<double> w{1.0};
    adam_step(s, w, std::vector<double>{2.0});
    CHECK(std::abs(w[0] - 0.9) < 1e-8);

    AdamState still;
    std::vector<double> z{3.0, -1.0};
    adam_step(still, z, std::vector<double>{0.0, 0.0});
    CHECK(z == std::vector<double>{3.0, -1.0});

    AdamState a, b;
    std::vector<double> wa{0.5, 0.5}, wb{0.5, 0.5};
    for (int i = 0; i < 10; ++i) {
        const std::vector<double> g{std::sin(i * 1.0), std::cos(i * 1.0)};
        adam_step(a, wa, g);
        adam_step(b, wb, g);
        CHECK(wa == wb);
    }
}

TEST_CASE("whole-network gradients")
{
    for (auto kind : {ModelKind::dense, ModelKind::lstm, ModelKind::gru, ModelKind::indrnn, ModelKind::transformer}) {
        for (auto task : {Task::regression, Task::classification}) {
            ModelSpec spec;
            spec.kind = kind;
            spec.task = task;
            spec.layers = {4, 3};
            spec.lookback = 4;
            spec.d_model = 4;
            spec.d_k = 3;
            spec.ff_hidden = 5;
            for (std::uint64_t seed = 1; seed <= 3; ++seed) {
                const auto g = oracle::network_fixture(spec, 3, seed);
                INFO(std::string(to_string(kind)) << " " << to_string(task) << " " << g.worst);
                CHECK(g.checked > 0);
                CHECK(g.max_rel < 1e-4);
            }
        }
    }
    ModelSpec sparse;
    sparse.kind = ModelKind::transformer;
    sparse.lookback = 6;
    sparse.d_model = 4;
    sparse.d_k = 4;
    sparse.ff_hidden = 4;
    sparse.probsparse = true;
    sparse.top_u = 3;
    const auto g = oracle::network_fixture(sparse, 2, 5);
    INFO(g.worst);
    CHECK(g.max_rel < 1e-4);
}

TEST_CASE("training")
{
    const auto data = linear_dataset(200, 4);
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch = 16;
    cfg.lr = 0.01;
    cfg.loss = LossKind::mse;

    SUBCASE("learns a linear target")
    {
        const auto model = train(linear_spec(), data, cfg);
        CHECK(model.loss_history().size() == 200);
        double err = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            err += std::pow(model.predict(data.windows[i]) - data.targets[i], 2);
        }
        CHECK(err / 200.0 < 1e-2);
    }
    SUBCASE("zero epochs returns the initial model")
    {
        cfg.epochs = 0;
        const auto model = train(linear_spec(), data, cfg);
        CHECK(model.loss_history().empty());
        CHECK(model.flat_parameters() == TrainedModel(linear_spec(), 1).flat_parameters());
    }
    SUBCASE("huge learning rate diverges")
    {
        cfg.lr = 1e3;
        CHECK_THROWS_AS(train(linear_spec(), data, cfg), DivergenceError);
    }
    SUBCASE("equal seeds train identically")
    {
        cfg.epochs = 5;
        ModelSpec spec;
        spec.kind = ModelKind::gru;
        spec.layers = {3};
        spec.lookback = 1;
        spec.seed = 6;
        CHECK(train(spec, data, cfg).flat_parameters() == train(spec, data, cfg).flat_parameters());
    }
    SUBCASE("save and load round trip")
    {
        cfg.epochs = 3;
        ModelSpec spec;
        spec.kind = ModelKind::transformer;
        spec.lookback = 1;
        spec.d_model = 4;
        spec.d_k = 4;
        spec.ff_hidden = 4;
        const auto model = train(spec, data, cfg);
        const auto dir = oracle::scratch_dir("model-roundtrip");
        model.save(dir / "m.json", dir / "m.bin");
        const auto back = TrainedModel::load(dir / "m.json");
        CHECK(back.flat_parameters() == model.flat_parameters());
        CHECK(back.predict(data.windows[7]) == model.predict(data.windows[7]));
        CHECK(back.loss_history() == model.loss_history());
    }
    SUBCASE("spec validation")
    {
        ModelSpec bad;
        bad.kind = ModelKind::lstm;
        bad.layers = {};
        CHECK_THROWS_AS(bad.validate(), ConfigError);
        CHECK_THROWS_AS(parse_model_kind("cnn"), ConfigError);
        const auto spec = model_spec_from_json(to_json(linear_spec()));
        CHECK(to_json(spec) == to_json(linear_spec()));
    }
}
