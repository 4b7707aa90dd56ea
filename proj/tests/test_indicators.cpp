#include "doctest.h"

#include "wavestack/error.hpp"
#include "wavestack/indicators.hpp"

#include <cmath>
#include <random>

using namespace wavestack;
namespace ind = wavestack::indicators;

namespace {

std::vector<double> random_walk(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> x(n);
    double level = 100.0;
    for (auto& v : x) {
        level += d(rng);
        v = level;
    }
    return x;
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

FeatureFrame frame_with(std::vector<double> price, std::vector<double> other)
{
    std::vector<Date> dates;
    for (std::size_t i = 0; i < price.size(); ++i) {
        dates.push_back(Date::from_ymd(2019, 1, 1) + static_cast<std::int32_t>(i));
    }
    FeatureFrame f(dates, "price");
    f.add_column("price", std::move(price));
    f.add_column("hashrate", std::move(other));
    return f;
}

}  // namespace

TEST_CASE("sma")
{
    const auto y = ind::sma(std::vector<double>{1, 2, 3, 4}, 2);
    CHECK(std::isnan(y[0]));
    CHECK(y[1] == 1.5);
    CHECK(y[2] == 2.5);
    CHECK(y[3] == 3.5);
    for (double v : ind::sma(std::vector<double>(10, 7.0), 4)) {
        CHECK((std::isnan(v) || v == doctest::Approx(7.0)));
    }
    const auto x = random_walk(50, 1);
    const auto s = ind::sma(x, 7);
    for (std::size_t t = 6; t < x.size(); ++t) {
        double sum = 0.0;
        for (std::size_t i = t - 6; i <= t; ++i) {
            sum += x[i];
        }
        CHECK(std::abs(s[t] - sum / 7.0) < 1e-12);
    }
}

TEST_CASE("ema")
{
    for (double v : ind::ema(std::vector<double>(10, 3.0), 5)) {
        CHECK(v == doctest::Approx(3.0));
    }
    const auto y = ind::ema(std::vector<double>{0, 1}, 3);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.5);
    const auto x = random_walk(20, 2);
    CHECK(ind::ema(x, 1) == x);
}

TEST_CASE("wma")
{
    CHECK(ind::wma(std::vector<double>{1, 1, 1}, 3).back() == doctest::Approx(1.0));
    CHECK(ind::wma(std::vector<double>{1, 2, 3}, 3).back() == doctest::Approx(14.0 / 6.0));
    const auto x = random_walk(20, 3);
    CHECK(ind::wma(x, 1) == x);
}

TEST_CASE("rsi")
{
    std::vector<double> up(30), down(30), alt(30);
    for (std::size_t i = 0; i < 30; ++i) {
        up[i] = static_cast<double>(i);
        down[i] = -static_cast<double>(i);
        alt[i] = i % 2 == 0 ? 0.0 : 1.0;
    }
    for (std::size_t t = 15; t < 30; ++t) {
        CHECK(ind::rsi(up)[t] == 100.0);
        CHECK(ind::rsi(down)[t] == 0.0);
        CHECK(ind::rsi(alt, 4)[t] == doctest::Approx(50.0));
    }
    CHECK(std::isnan(ind::rsi(up)[14]));
}

TEST_CASE("variance and standard deviation")
{
    const auto v = ind::var(std::vector<double>{1, 3}, 2);
    const auto s = ind::stdev(std::vector<double>{1, 3}, 2);
    CHECK(v[1] == 1.0);
    CHECK(s[1] == 1.0);
    for (double c : ind::var(std::vector<double>(8, 2.5), 3)) {
        CHECK((std::isnan(c) || c == 0.0));
    }
    const auto x = random_walk(40, 4);
    const auto vv = ind::var(x, 9);
    const auto ss = ind::stdev(x, 9);
    for (std::size_t t = 8; t < x.size(); ++t) {
        CHECK(std::abs(ss[t] * ss[t] - vv[t]) < 1e-12 * std::max(1.0, vv[t]));
    }
}

TEST_CASE("trix")
{
    for (double v : ind::trix(std::vector<double>(10, 5.0), 4)) {
        CHECK((std::isnan(v) || v == doctest::Approx(0.0)));
    }
    std::vector<double> pow2(10);
    for (std::size_t i = 0; i < pow2.size(); ++i) {
        pow2[i] = std::ldexp(1.0, static_cast<int>(i));
    }
    const auto t = ind::trix(pow2, 1);
    for (std::size_t i = 1; i < t.size(); ++i) {
        CHECK(t[i] == doctest::Approx(100.0));
    }
}

TEST_CASE("roc and momentum")
{
    CHECK(ind::roc(std::vector<double>{100, 110}, 1)[1] == doctest::Approx(0.1));
    CHECK(ind::mom(std::vector<double>{100, 110}, 1)[1] == 10.0);
    for (double v : ind::roc(std::vector<double>(5, 2.0), 2)) {
        CHECK((std::isnan(v) || v == 0.0));
    }
    for (double v : ind::mom(std::vector<double>(5, 2.0), 2)) {
        CHECK((std::isnan(v) || v == 0.0));
    }
    CHECK(std::isnan(ind::roc(std::vector<double>{0, 5, 6}, 1)[1]));
    CHECK(ind::roc(std::vector<double>{0, 5, 6}, 1)[2] == doctest::Approx(0.2));
}

TEST_CASE("warm-up covers every undefined leading sample")
{
    const auto x = random_walk(200, 5);
    for (auto kind : {ind::Kind::sma, ind::Kind::ema, ind::Kind::wma, ind::Kind::rsi, ind::Kind::stdev,
                      ind::Kind::var, ind::Kind::trix, ind::Kind::roc, ind::Kind::mom}) {
        for (std::size_t w : {1, 3, 7, 30, 90}) {
            const auto y = ind::compute({kind, w, "price"}, x);
            const std::size_t warm = ind::warmup(kind, w);
            INFO(ind::to_string(kind) << " " << w);
            for (std::size_t t = warm; t < y.size(); ++t) {
                CHECK(!std::isnan(y[t]));
            }
        }
    }
}

TEST_CASE("no indicator reads future samples")
{
    const auto x = random_walk(150, 6);
    for (auto kind : {ind::Kind::sma, ind::Kind::ema, ind::Kind::wma, ind::Kind::rsi, ind::Kind::stdev,
                      ind::Kind::var, ind::Kind::trix, ind::Kind::roc, ind::Kind::mom}) {
        for (std::size_t w : {1, 3, 7, 30}) {
            const ind::IndicatorSpec spec{kind, w, "price"};
            const auto base = ind::compute(spec, x);
            for (std::size_t cut = 40; cut < x.size(); cut += 23) {
                auto mutated = x;
                for (std::size_t i = cut; i < mutated.size(); ++i) {
                    mutated[i] = -mutated[i] * 3.0 + 7.0;
                }
                const auto y = ind::compute(spec, mutated);
                bool unchanged = true;
                for (std::size_t t = 0; t < cut; ++t) {
                    unchanged = unchanged && same(y[t], base[t]);
                }
                INFO(ind::to_string(kind) << " " << w << " cut " << cut);
                CHECK(unchanged);
            }
        }
    }
}

TEST_CASE("expand")
{
    const auto f = frame_with(random_walk(120, 7), random_walk(120, 8));
    CHECK(ind::expand(f, {}) == f);

    SUBCASE("column naming and head trim")
    {
        const std::vector<ind::IndicatorSpec> specs{{ind::Kind::sma, 30, "price"}, {ind::Kind::mom, 7, "hashrate"}};
        const auto e = ind::expand(f, specs);
        CHECK(e.rows() == 120 - 29);
        CHECK(e.cols() == 4);
        CHECK(e.has_column("price_sma(30)"));
        CHECK(e.has_column("hashrate_mom(7)"));
        CHECK(e.dates().front() == f.dates()[29]);
        CHECK(e.count_missing() == 0);
    }
    SUBCASE("default grid arithmetic")
    {
        std::vector<std::string> sources;
        for (int i = 0; i < 15; ++i) {
            sources.push_back("c" + std::to_string(i));
        }
        CHECK(ind::default_grid(sources).size() == 480);
        CHECK(ind::default_kinds().size() == 8);
        CHECK(ind::warmup(ind::default_grid(sources)) == 90);
    }
    SUBCASE("errors")
    {
        const std::vector<ind::IndicatorSpec> absent{{ind::Kind::sma, 3, "volume"}};
        CHECK_THROWS_AS(ind::expand(f, absent), SchemaError);
        const std::vector<ind::IndicatorSpec> too_long{{ind::Kind::sma, 200, "price"}};
        CHECK_THROWS_AS(ind::expand(f, too_long), SizeError);
        CHECK_THROWS_AS(ind::parse_kind("macd"), ConfigError);
        CHECK(ind::parse_kind("STD") == ind::Kind::stdev);
    }
}
