#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace wavestack::metrics {

double mae(std::span<const double> actual, std::span<const double> predicted);
double rmse(std::span<const double> actual, std::span<const double> predicted);
/// 100/n * sum |(actual - predicted) / actual|, dividing by the signed actual.
/// Any zero actual is a domain error.
double mape(std::span<const double> actual, std::span<const double> predicted);

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + tn + fp + fn; }
    std::size_t positives() const { return tp + fn; }
    std::size_t negatives() const { return tn + fp; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predictions);

// Zero denominators yield 0 and a warning, appended to `warnings` when given
// and sent to warn() otherwise.
double accuracy(const ConfusionCounts& c, std::vector<std::string>* warnings = nullptr);
double precision(const ConfusionCounts& c, std::vector<std::string>* warnings = nullptr);
double recall(const ConfusionCounts& c, std::vector<std::string>* warnings = nullptr);
double f1(const ConfusionCounts& c, std::vector<std::string>* warnings = nullptr);
double specificity(const ConfusionCounts& c, std::vector<std::string>* warnings = nullptr);

/// Mann-Whitney U / (P N) with midranks for ties. Single-class labels are a
/// domain error.
double roc_auc(std::span<const int> labels, std::span<const double> scores);

struct RocPoint {
    double threshold;  // +inf for the origin
    double fpr;
    double tpr;
};

/// One point per distinct score, descending, starting at (0, 0).
std::vector<RocPoint> roc_curve(std::span<const int> labels, std::span<const double> scores);

/// Trapezoidal area under a curve given in ascending fpr order.
double trapezoid_area(std::span<const RocPoint> curve);

}  // namespace wavestack::metrics
