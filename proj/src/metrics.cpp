#include "wavestack/metrics.hpp"

#include "wavestack/error.hpp"
#include "wavestack/log.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace wavestack::metrics {

namespace {

void check_pair(std::span<const double> actual, std::span<const double> predicted)
{
    if (actual.empty() || actual.size() != predicted.size()) {
        throw ShapeError("metric inputs must be non-empty and equal length (" + std::to_string(actual.size()) +
                         " vs " + std::to_string(predicted.size()) + ")");
    }
}

void check_binary(std::span<const int> values, const char* what)
{
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] != 0 && values[i] != 1) {
            throw DomainError(std::string(what) + " must be 0 or 1; entry " + std::to_string(i) + " is " +
                              std::to_string(values[i]));
        }
    }
}

double guarded(double num, std::size_t den, const char* metric, std::vector<std::string>* warnings)
{
    if (den == 0) {
        const std::string msg = std::string(metric) + " has a zero denominator; reporting 0";
        if (warnings != nullptr) {
            warnings->push_back(msg);
        } else {
            warn(msg);
        }
        return 0.0;
    }
    return num / static_cast<double>(den);
}

}  // namespace

double mae(std::span<const double> actual, std::span<const double> predicted)
{
    check_pair(actual, predicted);
    double sum = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        sum += std::abs(actual[i] - predicted[i]);
    }
    return sum / static_cast<double>(actual.size());
}

double rmse(std::span<const double> actual, std::span<const double> predicted)
{
    check_pair(actual, predicted);
    double sum = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double e = actual[i] - predicted[i];
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(actual.size()));
}

double mape(std::span<const double> actual, std::span<const double> predicted)
{
    check_pair(actual, predicted);
    double sum = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (actual[i] == 0.0) {
            throw DomainError("MAPE is undefined: actual value " + std::to_string(i) + " is zero");
        }
        sum += std::abs((actual[i] - predicted[i]) / actual[i]);
    }
    return 100.0 * sum / static_cast<double>(actual.size());
}

ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predictions)
{
    if (labels.size() != predictions.size()) {
        throw ShapeError(std::to_string(labels.size()) + " labels but " + std::to_string(predictions.size()) +
                         " predictions");
    }
    check_binary(labels, "labels");
    check_binary(predictions, "predictions");
    ConfusionCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) {
            (predictions[i] == 1 ? c.tp : c.fn) += 1;
        } else {
            (predictions[i] == 1 ? c.fp : c.tn) += 1;
        }
    }
    return c;
}

double accuracy(const ConfusionCounts& c, std::vector<std::string>* warnings)
{
    return guarded(static_cast<double>(c.tp + c.tn), c.total(), "accuracy", warnings);
}

double precision(const ConfusionCounts& c, std::vector<std::string>* warnings)
{
    return guarded(static_cast<double>(c.tp), c.tp + c.fp, "precision", warnings);
}

double recall(const ConfusionCounts& c, std::vector<std::string>* warnings)
{
    return guarded(static_cast<double>(c.tp), c.tp + c.fn, "recall", warnings);
}

double f1(const ConfusionCounts& c, std::vector<std::string>* warnings)
{
    const double p = precision(c, warnings);
    const double r = recall(c, warnings);
    if (p + r == 0.0) {
        const std::string msg = "F1 has a zero denominator; reporting 0";
        if (warnings != nullptr) {
            warnings->push_back(msg);
        } else {
            warn(msg);
        }
        return 0.0;
    }
    return 2.0 * p * r / (p + r);
}

double specificity(const ConfusionCounts& c, std::vector<std::string>* warnings)
{
    return guarded(static_cast<double>(c.tn), c.tn + c.fp, "specificity", warnings);
}

double roc_auc(std::span<const int> labels, std::span<const double> scores)
{
    if (labels.size() != scores.size()) {
        throw ShapeError(std::to_string(labels.size()) + " labels but " + std::to_string(scores.size()) + " scores");
    }
    check_binary(labels, "labels");
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const std::size_t negatives = labels.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw DomainError("AUC needs both classes among the labels");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) {
            ++j;
        }
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == 1) {
                rank_sum += midrank;
            }
        }
        i = j + 1;
    }
    const double p = static_cast<double>(positives);
    const double n = static_cast<double>(negatives);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

std::vector<RocPoint> roc_curve(std::span<const int> labels, std::span<const double> scores)
{
    if (labels.size() != scores.size()) {
        throw ShapeError(std::to_string(labels.size()) + " labels but " + std::to_string(scores.size()) + " scores");
    }
    check_binary(labels, "labels");
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const std::size_t negatives = labels.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw DomainError("ROC curve needs both classes among the labels");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<RocPoint> curve{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] == 1 ? tp : fp) += 1;
            ++i;
        }
        curve.push_back({s, static_cast<double>(fp) / static_cast<double>(negatives),
                         static_cast<double>(tp) / static_cast<double>(positives)});
    }
    return curve;
}

double trapezoid_area(std::span<const RocPoint> curve)
{
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
    }
    return area;
}

}  // namespace wavestack::metrics
