#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace wavestack {

/// Multilevel orthonormal Haar pyramid. Each stage pads an odd-length input
/// by repeating its last sample; stage lengths follow from original_length.
struct DwtDecomposition {
    std::vector<double> approx;                // coarsest approximation s_J
    std::vector<std::vector<double>> details;  // d_1 (finest) .. d_J (coarsest)
    std::size_t levels = 0;
    std::size_t original_length = 0;
};

/// Largest depth dwt_forward accepts for n samples: floor(log2 n).
std::size_t max_dwt_levels(std::size_t n);

DwtDecomposition dwt_forward(std::span<const double> x, std::size_t levels);
std::vector<double> dwt_inverse(const DwtDecomposition& decomposition);

enum class ThresholdMode { soft, hard };

struct DenoiseConfig {
    std::optional<std::size_t> levels;  // unset: auto = min(floor(log2 n), 6)
    ThresholdMode mode = ThresholdMode::soft;
};

std::size_t auto_levels(std::size_t n);

/// sigma = median(|finest detail|) / 0.6745.
double estimate_noise_sigma(std::span<const double> x);

/// sigma * sqrt(2 ln n).
double universal_threshold(std::span<const double> x);

double shrink(double coefficient, double threshold, ThresholdMode mode);

/// Shrinks every detail level with `threshold`, then reconstructs.
std::vector<double> denoise_with_threshold(std::span<const double> x, std::size_t levels, double threshold,
                                           ThresholdMode mode);

/// Universal-threshold wavelet shrinkage. Output length equals input length.
std::vector<double> denoise(std::span<const double> x, const DenoiseConfig& config = {});

/// Threshold learned on one partition and replayed elsewhere.
struct FittedDenoiser {
    double threshold = 0.0;
    ThresholdMode mode = ThresholdMode::soft;
    std::optional<std::size_t> levels;
    std::size_t window = 32;

    static FittedDenoiser fit(std::span<const double> train, const DenoiseConfig& config, std::size_t window);

    /// Causal application: out[t] is the last sample of the denoised trailing
    /// window x[t-window+1 .. t]. Never reads x[t+1..]. Windows shorter than
    /// four samples pass through unchanged.
    std::vector<double> apply_causal(std::span<const double> x) const;
};

}  // namespace wavestack
