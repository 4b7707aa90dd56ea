#include "wavestack/wavelet.hpp"

#include "wavestack/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace wavestack {

namespace {

constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;

// Lengths seen at the input of each stage: n_0 = n, n_{k+1} = ceil(n_k / 2).
std::vector<std::size_t> stage_lengths(std::size_t n, std::size_t levels)
{
    std::vector<std::size_t> lengths(levels);
    for (std::size_t k = 0; k < levels; ++k) {
        lengths[k] = n;
        n = (n + 1) / 2;
    }
    return lengths;
}

double median_of(std::vector<double> values)
{
    if (values.empty()) {
        return 0.0;
    }
    const auto mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

}  // namespace

std::size_t max_dwt_levels(std::size_t n)
{
    std::size_t levels = 0;
    while ((std::size_t{2} << levels) <= n) {
        ++levels;
    }
    return levels;
}

DwtDecomposition dwt_forward(std::span<const double> x, std::size_t levels)
{
    if (x.empty()) {
        throw SizeError("wavelet transform of an empty signal");
    }
    for (const double v : x) {
        if (!std::isfinite(v)) {
            throw DomainError("wavelet transform input contains non-finite values");
        }
    }
    if (levels == 0 || levels > max_dwt_levels(x.size())) {
        throw ConfigError("cannot decompose " + std::to_string(x.size()) + " samples to " +
                          std::to_string(levels) + " levels (max " + std::to_string(max_dwt_levels(x.size())) + ")");
    }

    DwtDecomposition out;
    out.levels = levels;
    out.original_length = x.size();
    out.details.reserve(levels);

    std::vector<double> current(x.begin(), x.end());
    for (std::size_t k = 0; k < levels; ++k) {
        if (current.size() % 2 == 1) {
            current.push_back(current.back());
        }
        const std::size_t half = current.size() / 2;
        std::vector<double> approx(half);
        std::vector<double> detail(half);
        for (std::size_t i = 0; i < half; ++i) {
            const double a = current[2 * i];
            const double b = current[2 * i + 1];
            approx[i] = (a + b) * inv_sqrt2;
            detail[i] = (a - b) * inv_sqrt2;
        }
        out.details.push_back(std::move(detail));
        current = std::move(approx);
    }
    out.approx = std::move(current);
    return out;
}

std::vector<double> dwt_inverse(const DwtDecomposition& d)
{
    if (d.levels == 0 || d.details.size() != d.levels || d.original_length == 0) {
        throw StructureError("decomposition has " + std::to_string(d.details.size()) + " detail levels, declares " +
                             std::to_string(d.levels));
    }
    const auto lengths = stage_lengths(d.original_length, d.levels);
    for (std::size_t k = 0; k < d.levels; ++k) {
        const std::size_t expected = (lengths[k] + 1) / 2;
        if (d.details[k].size() != expected) {
            throw StructureError("detail level " + std::to_string(k + 1) + " has " +
                                 std::to_string(d.details[k].size()) + " coefficients, expected " +
                                 std::to_string(expected));
        }
    }
    if (d.approx.size() != (lengths.back() + 1) / 2) {
        throw StructureError("approximation has " + std::to_string(d.approx.size()) + " coefficients, expected " +
                             std::to_string((lengths.back() + 1) / 2));
    }

    std::vector<double> current = d.approx;
    for (std::size_t k = d.levels; k-- > 0;) {
        const auto& detail = d.details[k];
        std::vector<double> up(2 * current.size());
        for (std::size_t i = 0; i < current.size(); ++i) {
            up[2 * i] = (current[i] + detail[i]) * inv_sqrt2;
            up[2 * i + 1] = (current[i] - detail[i]) * inv_sqrt2;
        }
        up.resize(lengths[k]);
        current = std::move(up);
    }
    return current;
}

std::size_t auto_levels(std::size_t n) { return std::min<std::size_t>(max_dwt_levels(n), 6); }

double estimate_noise_sigma(std::span<const double> x)
{
    const auto d = dwt_forward(x, 1);
    std::vector<double> magnitudes(d.details[0].size());
    std::transform(d.details[0].begin(), d.details[0].end(), magnitudes.begin(), [](double v) { return std::abs(v); });
    return median_of(std::move(magnitudes)) / 0.6745;
}

double universal_threshold(std::span<const double> x)
{
    return estimate_noise_sigma(x) * std::sqrt(2.0 * std::log(static_cast<double>(x.size())));
}

double shrink(double coefficient, double threshold, ThresholdMode mode)
{
    const double magnitude = std::abs(coefficient);
    if (mode == ThresholdMode::hard) {
        return magnitude <= threshold ? 0.0 : coefficient;
    }
    return std::copysign(std::max(magnitude - threshold, 0.0), coefficient);
}

std::vector<double> denoise_with_threshold(std::span<const double> x, std::size_t levels, double threshold,
                                           ThresholdMode mode)
{
    auto d = dwt_forward(x, levels);
    for (auto& detail : d.details) {
        for (auto& c : detail) {
            c = shrink(c, threshold, mode);
        }
    }
    return dwt_inverse(d);
}

std::vector<double> denoise(std::span<const double> x, const DenoiseConfig& config)
{
    if (x.size() < 4) {
        throw SizeError("denoise needs at least 4 samples, got " + std::to_string(x.size()));
    }
    const std::size_t levels = config.levels.value_or(auto_levels(x.size()));
    return denoise_with_threshold(x, levels, universal_threshold(x), config.mode);
}

FittedDenoiser FittedDenoiser::fit(std::span<const double> train, const DenoiseConfig& config, std::size_t window)
{
    if (train.size() < 4) {
        throw SizeError("denoiser fit needs at least 4 samples");
    }
    if (window < 4) {
        throw ConfigError("denoise window must be at least 4");
    }
    FittedDenoiser fitted;
    fitted.threshold = universal_threshold(train);
    fitted.mode = config.mode;
    fitted.levels = config.levels;
    fitted.window = window;
    return fitted;
}

std::vector<double> FittedDenoiser::apply_causal(std::span<const double> x) const
{
    std::vector<double> out(x.begin(), x.end());
    for (std::size_t t = 0; t < x.size(); ++t) {
        const std::size_t len = std::min(window, t + 1);
        if (len < 4) {
            continue;
        }
        const auto segment = x.subspan(t + 1 - len, len);
        const std::size_t depth = std::min(levels.value_or(auto_levels(len)), max_dwt_levels(len));
        out[t] = denoise_with_threshold(segment, depth, threshold, mode).back();
    }
    return out;
}

}  // namespace wavestack
