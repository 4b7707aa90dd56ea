#include "wavestack/indicators.hpp"

#include "wavestack/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace wavestack::indicators {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

void check_window(std::span<const double> x, std::size_t n, const char* name)
{
    if (n == 0) {
        throw ConfigError(std::string(name) + " window must be at least 1");
    }
    if (x.size() < n) {
        throw SizeError(std::string(name) + " window " + std::to_string(n) + " exceeds series length " +
                        std::to_string(x.size()));
    }
}

}  // namespace

std::vector<double> sma(std::span<const double> x, std::size_t n)
{
    check_window(x, n, "sma");
    std::vector<double> out(x.size(), nan);
    for (std::size_t t = n - 1; t < x.size(); ++t) {
        double sum = 0.0;
        for (std::size_t i = t + 1 - n; i <= t; ++i) {
            sum += x[i];
        }
        out[t] = sum / static_cast<double>(n);
    }
    return out;
}

std::vector<double> ema(std::span<const double> x, std::size_t n)
{
    if (n == 0) {
        throw ConfigError("ema window must be at least 1");
    }
    if (x.empty()) {
        throw SizeError("ema of an empty series");
    }
    const double k = 2.0 / (static_cast<double>(n) + 1.0);
    std::vector<double> out(x.size());
    out[0] = x[0];
    for (std::size_t t = 1; t < x.size(); ++t) {
        out[t] = k * x[t] + (1.0 - k) * out[t - 1];
    }
    return out;
}

std::vector<double> wma(std::span<const double> x, std::size_t n)
{
    check_window(x, n, "wma");
    const double denom = static_cast<double>(n) * static_cast<double>(n + 1) / 2.0;
    std::vector<double> out(x.size(), nan);
    for (std::size_t t = n - 1; t < x.size(); ++t) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += static_cast<double>(n - i) * x[t - i];
        }
        out[t] = sum / denom;
    }
    return out;
}

std::vector<double> rsi(std::span<const double> x, std::size_t n)
{
    if (n == 0) {
        throw ConfigError("rsi window must be at least 1");
    }
    if (x.size() < n + 1) {
        throw SizeError("rsi window " + std::to_string(n) + " needs at least " + std::to_string(n + 1) + " samples");
    }
    std::vector<double> out(x.size(), nan);
    for (std::size_t t = n; t < x.size(); ++t) {
        double up = 0.0;
        double down = 0.0;
        for (std::size_t i = t + 1 - n; i <= t; ++i) {
            const double move = x[i] - x[i - 1];
            if (move > 0.0) {
                up += move;
            } else {
                down -= move;
            }
        }
        up /= static_cast<double>(n);
        down /= static_cast<double>(n);
        if (down == 0.0) {
            out[t] = 100.0;
        } else if (up == 0.0) {
            out[t] = 0.0;
        } else {
            out[t] = 100.0 - 100.0 / (1.0 + up / down);
        }
    }
    return out;
}

std::vector<double> var(std::span<const double> x, std::size_t n)
{
    check_window(x, n, "var");
    std::vector<double> out(x.size(), nan);
    for (std::size_t t = n - 1; t < x.size(); ++t) {
        double mean = 0.0;
        for (std::size_t i = t + 1 - n; i <= t; ++i) {
            mean += x[i];
        }
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = t + 1 - n; i <= t; ++i) {
            ss += (x[i] - mean) * (x[i] - mean);
        }
        out[t] = ss / static_cast<double>(n);
    }
    return out;
}

std::vector<double> stdev(std::span<const double> x, std::size_t n)
{
    auto out = var(x, n);
    for (auto& v : out) {
        v = std::sqrt(v);
    }
    return out;
}

std::vector<double> trix(std::span<const double> x, std::size_t n)
{
    const auto e1 = ema(x, n);
    const auto e2 = ema(e1, n);
    const auto e3 = ema(e2, n);
    std::vector<double> out(x.size(), nan);
    for (std::size_t t = 1; t < x.size(); ++t) {
        if (e3[t - 1] != 0.0) {
            out[t] = 100.0 * (e3[t] - e3[t - 1]) / e3[t - 1];
        }
    }
    return out;
}

std::vector<double> roc(std::span<const double> x, std::size_t n)
{
    if (n == 0) {
        throw ConfigError("roc window must be at least 1");
    }
    if (x.size() < n + 1) {
        throw SizeError("roc window " + std::to_string(n) + " needs at least " + std::to_string(n + 1) + " samples");
    }
    std::vector<double> out(x.size(), nan);
    for (std::size_t t = n; t < x.size(); ++t) {
        if (x[t - n] != 0.0) {
            out[t] = (x[t] - x[t - n]) / x[t - n];
        }
    }
    return out;
}

std::vector<double> mom(std::span<const double> x, std::size_t n)
{
    if (n == 0) {
        throw ConfigError("mom window must be at least 1");
    }
    if (x.size() < n + 1) {
        throw SizeError("mom window " + std::to_string(n) + " needs at least " + std::to_string(n + 1) + " samples");
    }
    std::vector<double> out(x.size(), nan);
    for (std::size_t t = n; t < x.size(); ++t) {
        out[t] = x[t] - x[t - n];
    }
    return out;
}

const char* to_string(Kind kind)
{
    switch (kind) {
    case Kind::sma: return "sma";
    case Kind::ema: return "ema";
    case Kind::wma: return "wma";
    case Kind::rsi: return "rsi";
    case Kind::stdev: return "std";
    case Kind::var: return "var";
    case Kind::trix: return "trix";
    case Kind::roc: return "roc";
    case Kind::mom: return "mom";
    }
    return "?";
}

Kind parse_kind(const std::string& text)
{
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (const Kind k : {Kind::sma, Kind::ema, Kind::wma, Kind::rsi, Kind::stdev, Kind::var, Kind::trix, Kind::roc,
                         Kind::mom}) {
        if (lower == to_string(k)) {
            return k;
        }
    }
    if (lower == "stdev") {
        return Kind::stdev;
    }
    throw ConfigError("unknown indicator kind '" + text + "'");
}

std::string IndicatorSpec::column_name() const
{
    return source + "_" + to_string(kind) + "(" + std::to_string(window) + ")";
}

std::vector<double> compute(const IndicatorSpec& spec, std::span<const double> x)
{
    switch (spec.kind) {
    case Kind::sma: return sma(x, spec.window);
    case Kind::ema: return ema(x, spec.window);
    case Kind::wma: return wma(x, spec.window);
    case Kind::rsi: return rsi(x, spec.window);
    case Kind::stdev: return stdev(x, spec.window);
    case Kind::var: return var(x, spec.window);
    case Kind::trix: return trix(x, spec.window);
    case Kind::roc: return roc(x, spec.window);
    case Kind::mom: return mom(x, spec.window);
    }
    throw ConfigError("unhandled indicator kind");
}

std::size_t warmup(Kind kind, std::size_t window)
{
    switch (kind) {
    case Kind::sma:
    case Kind::wma:
    case Kind::stdev:
    case Kind::var:
        return window - 1;
    case Kind::ema:
        return 0;
    case Kind::trix:
        return 1;
    case Kind::rsi:
    case Kind::roc:
    case Kind::mom:
        return window;
    }
    return window;
}

std::size_t warmup(std::span<const IndicatorSpec> specs)
{
    std::size_t longest = 0;
    for (const auto& s : specs) {
        longest = std::max(longest, warmup(s.kind, s.window));
    }
    return longest;
}

std::vector<Kind> default_kinds()
{
    return {Kind::sma, Kind::ema, Kind::wma, Kind::rsi, Kind::var, Kind::trix, Kind::roc, Kind::mom};
}

std::vector<std::size_t> default_windows() { return {3, 7, 30, 90}; }

std::vector<IndicatorSpec> default_grid(std::span<const std::string> sources)
{
    std::vector<IndicatorSpec> grid;
    for (const auto& source : sources) {
        for (const auto kind : default_kinds()) {
            for (const auto window : default_windows()) {
                grid.push_back({kind, window, source});
            }
        }
    }
    return grid;
}

FeatureFrame expand(const FeatureFrame& frame, std::span<const IndicatorSpec> specs)
{
    if (specs.empty()) {
        return frame;
    }
    for (const auto& s : specs) {
        if (!frame.has_column(s.source)) {
            throw SchemaError("indicator " + s.column_name() + " references absent column '" + s.source + "'");
        }
        if (s.window == 0) {
            throw ConfigError("indicator " + s.column_name() + " has a zero window");
        }
    }
    const std::size_t trim = warmup(specs);
    if (trim >= frame.rows()) {
        throw SizeError("indicator warm-up of " + std::to_string(trim) + " rows consumes the whole frame of " +
                        std::to_string(frame.rows()) + " rows");
    }

    FeatureFrame full = frame;
    for (const auto& s : specs) {
        full.add_column(s.column_name(), compute(s, frame.column(s.source)));
    }
    FeatureFrame out = full.slice_rows(trim, full.rows());
    for (std::size_t c = frame.cols(); c < out.cols(); ++c) {
        auto col = out.column(c);
        double last = 0.0;
        for (auto& v : col) {
            if (std::isnan(v)) {
                v = last;
            } else {
                last = v;
            }
        }
        out.set_column(out.names()[c], std::move(col));
    }
    return out;
}

}  // namespace wavestack::indicators
