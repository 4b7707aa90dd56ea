#pragma once

#include "wavestack/ingest.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace wavestack::indicators {

// Every indicator returns a series aligned with its input; positions where
// the value is undefined (warm-up, guarded divisions) hold NaN. None of them
// reads x[t+1..] when producing out[t].

std::vector<double> sma(std::span<const double> x, std::size_t n);
/// ema[0] = x[0]; ema[t] = k x[t] + (1-k) ema[t-1], k = 2/(n+1).
std::vector<double> ema(std::span<const double> x, std::size_t n);
/// Most recent sample weighted n, oldest weighted 1, over n(n+1)/2.
std::vector<double> wma(std::span<const double> x, std::size_t n);
/// 100 - 100/(1 + up/down) over simple n-day averages of up and down moves.
std::vector<double> rsi(std::span<const double> x, std::size_t n = 15);
/// Rolling population variance (divisor n) and its square root.
std::vector<double> var(std::span<const double> x, std::size_t n);
std::vector<double> stdev(std::span<const double> x, std::size_t n);
/// 100 * (e3[t] - e3[t-1]) / e3[t-1] with e3 the triple EMA.
std::vector<double> trix(std::span<const double> x, std::size_t n);
std::vector<double> roc(std::span<const double> x, std::size_t n);
std::vector<double> mom(std::span<const double> x, std::size_t n);

enum class Kind { sma, ema, wma, rsi, stdev, var, trix, roc, mom };

const char* to_string(Kind kind);
/// Case-insensitive; accepts "std" for stdev. Throws ConfigError.
Kind parse_kind(const std::string& text);

struct IndicatorSpec {
    Kind kind = Kind::sma;
    std::size_t window = 1;
    std::string source;

    /// `<source>_<kind>(<window>)`, e.g. `price_sma(30)`.
    std::string column_name() const;
};

std::vector<double> compute(const IndicatorSpec& spec, std::span<const double> x);

/// Leading positions that are undefined regardless of the data.
std::size_t warmup(Kind kind, std::size_t window);
std::size_t warmup(std::span<const IndicatorSpec> specs);

/// Windows {3, 7, 30, 90} crossed with the default kinds, for each source.
std::vector<IndicatorSpec> default_grid(std::span<const std::string> sources);
std::vector<Kind> default_kinds();
std::vector<std::size_t> default_windows();

/// Appends all indicator columns and trims the head by the longest warm-up.
/// Data-dependent holes left after trimming are forward-filled (0 before the
/// first defined value).
FeatureFrame expand(const FeatureFrame& frame, std::span<const IndicatorSpec> specs);

}  // namespace wavestack::indicators
