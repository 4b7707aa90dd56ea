#include "oracles.hpp"

#include "wavestack/ingest.hpp"
#include "wavestack/model.hpp"
#include "wavestack/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace oracle {

namespace fs = std::filesystem;
namespace nn = wavestack::neural;
using nn::Vec;

namespace {

Vec random_vec(std::size_t n, std::mt19937_64& rng, double scale = 1.0)
{
    std::normal_distribution<double> dist(0.0, scale);
    Vec v(n);
    for (auto& x : v) {
        x = dist(rng);
    }
    return v;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0)
{
    Matrix m(r, c);
    std::normal_distribution<double> dist(0.0, scale);
    for (std::size_t i = 0; i < m.size(); ++i) {
        m.data()[i] = dist(rng);
    }
    return m;
}

std::span<double> span_of(Matrix& m) { return m.data(); }
std::span<const double> span_of(const Matrix& m) { return m.data(); }

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

void check_params(std::vector<nn::NamedTensor> params, std::vector<nn::NamedTensor> grads,
                  const std::function<double()>& loss, GradCheck& out)
{
    for (std::size_t i = 0; i < params.size(); ++i) {
        check_entries(params[i].name, span_of(*params[i].tensor), span_of(*grads[i].tensor), loss, out);
    }
}

}  // namespace

double relative_error(double analytic, double numeric, double floor)
{
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

void GradCheck::merge(const GradCheck& other)
{
    if (other.max_rel > max_rel) {
        max_rel = other.max_rel;
        worst = other.worst;
    }
    checked += other.checked;
}

void check_entries(const std::string& name, std::span<double> x, std::span<const double> analytic,
                   const std::function<double()>& loss, GradCheck& out, double step, double floor)
{
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + step;
        const double up = loss();
        x[i] = saved - step;
        const double down = loss();
        x[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double err = relative_error(analytic[i], numeric, floor);
        ++out.checked;
        if (err > out.max_rel) {
            out.max_rel = err;
            out.worst = name + "[" + std::to_string(i) + "]";
        }
    }
}

// ---------------------------------------------------------------------------
// Recurrent cells

GradCheck lstm_fixture(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const std::size_t n = 3, m = 4, steps = 4;
    auto p = nn::LstmParams::random(n, m, rng);
    for (auto& t : p.tensors("")) {
        for (auto& v : span_of(*t.tensor)) {
            v *= 2.0;
        }
    }
    std::vector<Vec> xs;
    for (std::size_t t = 0; t < steps; ++t) {
        xs.push_back(random_vec(n, rng));
    }
    Vec h0 = random_vec(m, rng, 0.5), c0 = random_vec(m, rng, 0.5);
    std::vector<Vec> rh;
    for (std::size_t t = 0; t < steps; ++t) {
        rh.push_back(random_vec(m, rng));
    }
    const Vec rc = random_vec(m, rng);

    auto loss = [&] {
        Vec h = h0, c = c0;
        double l = 0.0;
        for (std::size_t t = 0; t < steps; ++t) {
            auto s = nn::lstm_step(p, xs[t], h, c);
            h = s.h;
            c = s.c;
            l += dot(rh[t], h);
        }
        return l + dot(rc, c);
    };

    std::vector<nn::LstmCache> caches(steps);
    {
        Vec h = h0, c = c0;
        for (std::size_t t = 0; t < steps; ++t) {
            auto s = nn::lstm_step(p, xs[t], h, c, &caches[t]);
            h = s.h;
            c = s.c;
        }
    }
    auto g = nn::LstmParams::zeros(n, m);
    std::vector<Vec> dx(steps);
    Vec dh_next(m, 0.0), dc_next = rc;
    for (std::size_t t = steps; t-- > 0;) {
        Vec dh = dh_next;
        for (std::size_t j = 0; j < m; ++j) {
            dh[j] += rh[t][j];
        }
        auto sg = nn::lstm_step_backward(p, caches[t], dh, dc_next, g);
        dx[t] = sg.dx;
        dh_next = sg.dh_prev;
        dc_next = sg.dc_prev;
    }

    GradCheck out;
    check_params(p.tensors("lstm."), g.tensors("lstm."), loss, out);
    for (std::size_t t = 0; t < steps; ++t) {
        check_entries("x" + std::to_string(t), xs[t], dx[t], loss, out);
    }
    check_entries("h0", h0, dh_next, loss, out);
    check_entries("c0", c0, dc_next, loss, out);
    return out;
}

GradCheck gru_fixture(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const std::size_t n = 3, m = 4, steps = 4;
    auto p = nn::GruParams::random(n, m, rng);
    for (auto& t : p.tensors("")) {
        for (auto& v : span_of(*t.tensor)) {
            v *= 2.0;
        }
    }
    std::vector<Vec> xs;
    for (std::size_t t = 0; t < steps; ++t) {
        xs.push_back(random_vec(n, rng));
    }
    Vec h0 = random_vec(m, rng, 0.5);
    std::vector<Vec> rh;
    for (std::size_t t = 0; t < steps; ++t) {
        rh.push_back(random_vec(m, rng));
    }

    auto loss = [&] {
        Vec h = h0;
        double l = 0.0;
        for (std::size_t t = 0; t < steps; ++t) {
            h = nn::gru_step(p, xs[t], h);
            l += dot(rh[t], h);
        }
        return l;
    };

    std::vector<nn::GruCache> caches(steps);
    {
        Vec h = h0;
        for (std::size_t t = 0; t < steps; ++t) {
            h = nn::gru_step(p, xs[t], h, &caches[t]);
        }
    }
    auto g = nn::GruParams::zeros(n, m);
    std::vector<Vec> dx(steps);
    Vec dh_next(m, 0.0);
    for (std::size_t t = steps; t-- > 0;) {
        Vec dh = dh_next;
        for (std::size_t j = 0; j < m; ++j) {
            dh[j] += rh[t][j];
        }
        auto sg = nn::gru_step_backward(p, caches[t], dh, g);
        dx[t] = sg.dx;
        dh_next = sg.dh_prev;
    }

    GradCheck out;
    check_params(p.tensors("gru."), g.tensors("gru."), loss, out);
    for (std::size_t t = 0; t < steps; ++t) {
        check_entries("x" + std::to_string(t), xs[t], dx[t], loss, out);
    }
    check_entries("h0", h0, dh_next, loss, out);
    return out;
}

GradCheck indrnn_fixture(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const std::size_t n = 3, m = 4, steps = 4;
    auto p = nn::IndRnnParams::random(n, m, rng);
    for (std::size_t j = 0; j < m; ++j) {
        p.b(j, 0) = 0.5;
    }
    std::vector<Vec> xs;
    for (std::size_t t = 0; t < steps; ++t) {
        xs.push_back(random_vec(n, rng));
    }
    Vec h0 = random_vec(m, rng, 0.5);
    for (auto& v : h0) {
        v = std::abs(v);
    }
    std::vector<Vec> rh;
    for (std::size_t t = 0; t < steps; ++t) {
        rh.push_back(random_vec(m, rng));
    }

    auto loss = [&] {
        Vec h = h0;
        double l = 0.0;
        for (std::size_t t = 0; t < steps; ++t) {
            h = nn::indrnn_step(p, xs[t], h);
            l += dot(rh[t], h);
        }
        return l;
    };

    std::vector<nn::IndRnnCache> caches(steps);
    {
        Vec h = h0;
        for (std::size_t t = 0; t < steps; ++t) {
            h = nn::indrnn_step(p, xs[t], h, &caches[t]);
        }
    }
    auto g = nn::IndRnnParams::zeros(n, m);
    std::vector<Vec> dx(steps);
    Vec dh_next(m, 0.0);
    for (std::size_t t = steps; t-- > 0;) {
        Vec dh = dh_next;
        for (std::size_t j = 0; j < m; ++j) {
            dh[j] += rh[t][j];
        }
        auto sg = nn::indrnn_step_backward(p, caches[t], dh, g);
        dx[t] = sg.dx;
        dh_next = sg.dh_prev;
    }

    GradCheck out;
    check_params(p.tensors("indrnn."), g.tensors("indrnn."), loss, out);
    for (std::size_t t = 0; t < steps; ++t) {
        check_entries("x" + std::to_string(t), xs[t], dx[t], loss, out);
    }
    check_entries("h0", h0, dh_next, loss, out);
    return out;
}

GradCheck dense_fixture(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const nn::Activation acts[] = {nn::Activation::relu, nn::Activation::tanh, nn::Activation::sigmoid,
                                   nn::Activation::identity};
    const std::size_t sizes[] = {5, 6, 4, 3, 2};
    std::vector<nn::DenseParams> layers;
    for (std::size_t l = 0; l < 4; ++l) {
        layers.push_back(nn::DenseParams::random(sizes[l], sizes[l + 1], rng));
        for (std::size_t j = 0; j < layers.back().out(); ++j) {
            layers.back().b(j, 0) = 0.1;
        }
    }
    Vec x = random_vec(sizes[0], rng);
    const Vec r = random_vec(sizes[4], rng);

    auto loss = [&] {
        Vec h = x;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            h = nn::dense_forward(layers[l], h, acts[l]);
        }
        return dot(r, h);
    };

    std::vector<nn::DenseCache> caches(layers.size());
    Vec h = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        h = nn::dense_forward(layers[l], h, acts[l], &caches[l]);
    }
    std::vector<nn::DenseParams> grads;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        grads.push_back(nn::DenseParams::zeros(sizes[l], sizes[l + 1]));
    }
    Vec dy = r;
    for (std::size_t l = layers.size(); l-- > 0;) {
        dy = nn::dense_backward(layers[l], caches[l], acts[l], dy, grads[l]);
    }

    GradCheck out;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string prefix = "dense" + std::to_string(l) + ".";
        check_params(layers[l].tensors(prefix), grads[l].tensors(prefix), loss, out);
    }
    check_entries("x", x, dy, loss, out);
    return out;
}

// ---------------------------------------------------------------------------
// Attention

namespace {

GradCheck attention_check(std::uint64_t seed, bool sparse)
{
    std::mt19937_64 rng(seed);
    const std::size_t lq = 6, lk = 6, dk = 4, dv = 3;
    Matrix q = random_matrix(lq, dk, rng), k = random_matrix(lk, dk, rng), v = random_matrix(lk, dv, rng);
    const Matrix r = random_matrix(lq, dv, rng);
    nn::AttentionConfig cfg;
    cfg.d_model = dk;
    cfg.d_k = dk;
    cfg.probsparse = sparse;
    cfg.top_u = 3;

    auto run = [&](nn::AttentionCache* cache) {
        return sparse ? nn::probsparse_attention(q, k, v, cfg, cache) : nn::attention(q, k, v, dk, cache);
    };
    auto loss = [&] {
        const Matrix out = run(nullptr);
        return dot(span_of(out), span_of(r));
    };
    nn::AttentionCache cache;
    run(&cache);
    const auto g = nn::attention_backward(cache, r);

    GradCheck out;
    check_entries("q", span_of(q), span_of(g.dq), loss, out);
    check_entries("k", span_of(k), span_of(g.dk), loss, out);
    check_entries("v", span_of(v), span_of(g.dv), loss, out);
    return out;
}

}  // namespace

GradCheck attention_fixture(std::uint64_t seed) { return attention_check(seed, false); }
GradCheck probsparse_fixture(std::uint64_t seed) { return attention_check(seed, true); }

GradCheck loss_fixture(nn::LossKind kind, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const std::size_t n = 8;
    Vec pred(n), target(n);
    std::uniform_real_distribution<double> unit(0.05, 0.95);
    std::normal_distribution<double> normal(0.0, 2.0);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < n; ++i) {
        if (kind == nn::LossKind::bce) {
            pred[i] = unit(rng);
            target[i] = coin(rng) ? 1.0 : 0.0;
        } else {
            pred[i] = normal(rng);
            target[i] = normal(rng);
        }
    }
    const auto value = nn::loss(kind, pred, target);
    GradCheck out;
    check_entries(nn::to_string(kind), pred, value.grad, [&] { return nn::loss(kind, pred, target).value; }, out);
    return out;
}

GradCheck network_fixture(const wavestack::ModelSpec& spec, std::size_t features, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    auto net = wavestack::make_network(spec, features);
    const Matrix window = random_matrix(spec.lookback, features, rng);
    const double c = 1.7;
    net->zero_grad();
    net->forward(window);
    net->backward(c);

    std::vector<nn::NamedTensor> params(net->params().begin(), net->params().end());
    std::vector<nn::NamedTensor> grads(net->grads().begin(), net->grads().end());
    std::vector<Matrix> snapshot;
    for (const auto& g : grads) {
        snapshot.push_back(*g.tensor);
    }
    auto loss = [&] { return c * net->forward(window); };
    GradCheck out;
    for (std::size_t i = 0; i < params.size(); ++i) {
        check_entries(params[i].name, span_of(*params[i].tensor), span_of(snapshot[i]), loss, out, 1e-6, 1e-5);
    }
    return out;
}

// ---------------------------------------------------------------------------
// IndRNN

IndRnnUnroll indrnn_unroll(double w, double u, double b, const double x[3], double h0)
{
    nn::IndRnnParams p = nn::IndRnnParams::zeros(1, 1);
    p.w(0, 0) = w;
    p.u(0, 0) = u;
    p.b(0, 0) = b;

    std::vector<nn::IndRnnCache> caches(3);
    Vec h{h0};
    for (std::size_t t = 0; t < 3; ++t) {
        h = nn::indrnn_step(p, std::span<const double>(&x[t], 1), h, &caches[t]);
    }

    IndRnnUnroll out{};
    auto g = nn::IndRnnParams::zeros(1, 1);
    Vec dh{1.0};  // dJ/dh_3
    for (std::size_t t = 3; t-- > 0;) {
        dh = nn::indrnn_step_backward(p, caches[t], dh, g).dh_prev;
        out.analytic_dh[t] = dh[0];  // dJ/dh_t, the state entering step t+1
    }

    const double dJ_dhT = 1.0;
    for (std::size_t t = 0; t < 3; ++t) {
        double prod = 1.0;
        for (std::size_t k = t; k < 3; ++k) {
            prod *= caches[k].pre[0] > 0.0 ? 1.0 : 0.0;
        }
        out.closed_form_dh[t] = dJ_dhT * std::pow(u, static_cast<double>(3 - t)) * prod;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Statistics

double chi2_double_loop(const std::vector<std::vector<std::size_t>>& counts)
{
    const std::size_t m = counts.size();
    const std::size_t k = counts.front().size();
    std::vector<double> row(m, 0.0), col(k, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            row[i] += static_cast<double>(counts[i][j]);
            col[j] += static_cast<double>(counts[i][j]);
            total += static_cast<double>(counts[i][j]);
        }
    }
    double chi = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const double e = row[i] * col[j] / total;
            if (e > 0.0) {
                const double d = static_cast<double>(counts[i][j]) - e;
                chi += d * d / e;
            }
        }
    }
    return chi;
}

double auc_pairs(std::span<const int> labels, std::span<const double> scores)
{
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1) {
            continue;
        }
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j] != 0) {
                continue;
            }
            pairs += 1.0;
            if (scores[i] > scores[j]) {
                wins += 1.0;
            } else if (scores[i] == scores[j]) {
                wins += 0.5;
            }
        }
    }
    return wins / pairs;
}

std::vector<int> vote_by_counting(const std::vector<std::vector<double>>& probs, double threshold)
{
    std::vector<int> out;
    for (std::size_t s = 0; s < probs.front().size(); ++s) {
        std::size_t yes = 0;
        for (const auto& member : probs) {
            if (member[s] > threshold) {
                ++yes;
            }
        }
        out.push_back(yes * 2 > probs.size() ? 1 : 0);
    }
    return out;
}

double mse(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return s / static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------
// Pipeline fixtures

void write_synthetic_csv(const fs::path& path, std::size_t days, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double pi = std::acos(-1.0);
    std::ofstream out(path);
    out << "date,price,hashrate,difficulty,transactions,median_fee\n";
    const auto start = wavestack::Date::from_ymd(2018, 1, 1);
    for (std::size_t i = 0; i < days; ++i) {
        const double t = static_cast<double>(i);
        const double seasonal = 10.0 * std::sin(2 * pi * t / 30.0) + 15.0 * std::sin(2 * pi * t / 120.0 + 1.0) +
                                20.0 * std::sin(2 * pi * t / 365.0 + 2.0);
        const double level = 200.0 + 0.01 * t + seasonal;
        char line[256];
        std::snprintf(line, sizeof line, "%s,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                      (start + static_cast<std::int32_t>(i)).to_string().c_str(), level + 2.0 * noise(rng),
                      50.0 + 0.2 * level + noise(rng), 1000.0 + 3.0 * level + 5.0 * noise(rng),
                      3.0e5 + 500.0 * seasonal + 4.0e3 * noise(rng), std::abs(0.5 + 0.01 * seasonal + 0.05 * noise(rng)));
        out << line;
    }
}

nlohmann::json small_config(const fs::path& data, const fs::path& output, std::uint64_t seed)
{
    return {
        {"data", data.string()},
        {"horizons", {1, 7}},
        {"tasks", {"regression", "classification"}},
        {"outliers", {{"enabled", true}, {"trees", 20}, {"contamination", 0.01}}},
        {"denoise", {{"enabled", true}, {"apply_to", "features"}, {"window", 16}}},
        {"indicators",
         {{{"kind", "sma"}, {"window", 7}, {"source", "price"}},
          {{"kind", "rsi"}, {"window", 15}, {"source", "price"}},
          {{"kind", "mom"}, {"window", 3}, {"source", "price"}},
          {{"kind", "ema"}, {"window", 7}, {"source", "hashrate"}},
          {{"kind", "roc"}, {"window", 7}, {"source", "transactions"}}}},
        {"selector", {{"method", "embedded"}, {"k", 4}, {"trees", 10}, {"max_depth", 4}}},
        {"ensemble",
         {{{"kind", "lstm"}, {"layers", {4}}},
          {{"kind", "gru"}, {"layers", {4}}},
          {{"kind", "indrnn"}, {"layers", {4}}},
          {{"kind", "transformer"}, {"d_model", 4}, {"d_k", 4}, {"ff_hidden", 4}, {"probsparse", true}},
          {{"kind", "dense"}, {"layers", {4}}}}},
        {"lookback", 5},
        {"train", {{"epochs", 3}, {"batch", 16}, {"lr", 0.01}}},
        {"threads", 2},
        {"seed", seed},
        {"output", output.string()},
    };
}

namespace {

std::vector<std::string> csv_lines(const fs::path& path)
{
    std::vector<std::string> lines;
    std::istringstream in(read_file(path));
    for (std::string line; std::getline(in, line);) {
        lines.push_back(line);
    }
    return lines;
}

void through_train(const wavestack::RunConfig& cfg, const fs::path& dir)
{
    fs::create_directories(dir);
    wavestack::pipeline::stage_features(cfg, dir);
    wavestack::pipeline::stage_denoise(cfg, dir);
    wavestack::pipeline::stage_select(cfg, dir);
    wavestack::pipeline::stage_train(cfg, dir);
}

}  // namespace

TamperResult tamper_check(const fs::path& root, std::uint64_t seed)
{
    const auto data = root / "data.csv";
    write_synthetic_csv(data, 300, 17);
    const auto cfg = wavestack::parse_config(small_config(data, root / "runs", seed), root);
    through_train(cfg, root / "clean");
    const auto split = nlohmann::json::parse(read_file(root / "clean" / "split.json"));
    const auto first_test = wavestack::Date::parse(split["first_test_date"].get<std::string>());

    const auto raw = wavestack::load_csv(data);
    wavestack::FeatureFrame tampered(raw.dates(), raw.target());
    for (const auto& name : raw.names()) {
        auto col = raw.column(name);
        for (std::size_t r = 0; r < col.size(); ++r) {
            if (!(raw.dates()[r] < first_test)) {
                col[r] = col[r] * 7.0 + 1000.0;
            }
        }
        tampered.add_column(name, col);
    }
    const auto data2 = root / "tampered.csv";
    wavestack::write_csv(data2, tampered);
    through_train(wavestack::parse_config(small_config(data2, root / "runs", seed), root), root / "dirty");

    TamperResult out;
    const std::size_t train_rows = split["train_rows"].get<std::size_t>();
    for (const char* name : {"features_raw.csv", "features.csv"}) {
        const auto a = csv_lines(root / "clean" / name);
        const auto b = csv_lines(root / "dirty" / name);
        for (std::size_t r = 0; r <= train_rows; ++r) {
            if (a.at(r) != b.at(r)) {
                out.leaks.push_back(std::string(name) + " row " + std::to_string(r));
            }
        }
        out.test_rows_changed = out.test_rows_changed || a.back() != b.back();
    }
    for (const auto& entry : fs::recursive_directory_iterator(root / "clean")) {
        const auto rel = fs::relative(entry.path(), root / "clean");
        const auto name = rel.string();
        const bool training_side = name.starts_with("selection_") || name.starts_with("ensemble_") ||
                                   name == "loss_history.csv" || name == "outliers.json" || name == "denoise.json";
        if (!entry.is_regular_file() || !training_side) {
            continue;
        }
        std::string a = read_file(entry.path());
        std::string b = read_file(root / "dirty" / rel);
        if (name == "outliers.json" || name.ends_with("ensemble.json")) {
            auto ja = nlohmann::json::parse(a);
            auto jb = nlohmann::json::parse(b);
            for (auto* j : {&ja, &jb}) {
                j->erase("test");
                if (j->contains("metadata")) {
                    (*j)["metadata"].erase("config_hash");
                }
            }
            a = ja.dump();
            b = jb.dump();
        }
        if (a != b) {
            out.leaks.push_back(name);
        }
    }
    return out;
}

namespace {

bool has_type(const nlohmann::json& v, const std::string& type)
{
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "integer") return v.is_number_integer();
    if (type == "number") return v.is_number();
    if (type == "boolean") return v.is_boolean();
    if (type == "null") return v.is_null();
    return false;
}

void validate(const nlohmann::json& root, const nlohmann::json& schema, const nlohmann::json& v,
              const std::string& at, std::vector<std::string>& out)
{
    if (schema.contains("$ref")) {
        const auto ref = schema["$ref"].get<std::string>();
        validate(root, root.at(nlohmann::json::json_pointer(ref.substr(1))), v, at, out);
        return;
    }
    if (schema.contains("type")) {
        const auto& t = schema["type"];
        bool ok = false;
        for (const auto& one : t.is_array() ? t : nlohmann::json::array({t})) {
            ok = ok || has_type(v, one.get<std::string>());
        }
        if (!ok) {
            out.push_back(at + ": expected type " + t.dump());
            return;
        }
    }
    if (schema.contains("enum") &&
        std::find(schema["enum"].begin(), schema["enum"].end(), v) == schema["enum"].end()) {
        out.push_back(at + ": " + v.dump() + " not in " + schema["enum"].dump());
    }
    if (v.is_number()) {
        if (schema.contains("minimum") && v.get<double>() < schema["minimum"].get<double>()) {
            out.push_back(at + ": below minimum");
        }
        if (schema.contains("maximum") && v.get<double>() > schema["maximum"].get<double>()) {
            out.push_back(at + ": above maximum");
        }
    }
    if (v.is_object()) {
        for (const auto& key : schema.value("required", nlohmann::json::array())) {
            if (!v.contains(key.get<std::string>())) {
                out.push_back(at + ": missing " + key.get<std::string>());
            }
        }
        const auto props = schema.value("properties", nlohmann::json::object());
        for (const auto& [key, child] : v.items()) {
            if (props.contains(key)) {
                validate(root, props[key], child, at + "/" + key, out);
            } else if (schema.contains("additionalProperties")) {
                const auto& extra = schema["additionalProperties"];
                if (extra.is_boolean() && !extra.get<bool>()) {
                    out.push_back(at + ": unexpected key " + key);
                } else if (extra.is_object()) {
                    validate(root, extra, child, at + "/" + key, out);
                }
            }
        }
    }
    if (v.is_array()) {
        if (schema.contains("minItems") && v.size() < schema["minItems"].get<std::size_t>()) {
            out.push_back(at + ": fewer than minItems");
        }
        if (schema.contains("items")) {
            for (std::size_t i = 0; i < v.size(); ++i) {
                validate(root, schema["items"], v[i], at + "/" + std::to_string(i), out);
            }
        }
    }
}

}  // namespace

std::vector<std::string> schema_violations(const nlohmann::json& schema, const nlohmann::json& value)
{
    std::vector<std::string> out;
    validate(schema, schema, value, "", out);
    return out;
}

fs::path source_dir() { return WAVESTACK_SOURCE_DIR; }

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch_dir(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("wavestack-test-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace oracle
