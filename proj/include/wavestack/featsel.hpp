#pragma once

#include "wavestack/ingest.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wavestack::featsel {

/// Column-major feature matrix.
struct FeatureMatrix {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;

    std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
    std::size_t cols() const { return columns.size(); }
    FeatureMatrix subset(std::span<const std::size_t> indices) const;
    FeatureMatrix head_rows(std::size_t count) const;
};

/// All frame columns, in frame order.
FeatureMatrix feature_matrix(const FeatureFrame& frame);

// ---------------------------------------------------------------------------
// Chi-squared

/// m intervals x k classes.
class ContingencyTable {
public:
    explicit ContingencyTable(std::vector<std::vector<std::size_t>> counts);

    std::size_t intervals() const { return counts_.size(); }
    std::size_t classes() const { return counts_.empty() ? 0 : counts_.front().size(); }
    std::size_t count(std::size_t i, std::size_t j) const { return counts_[i][j]; }
    std::size_t row_total(std::size_t i) const { return row_totals_[i]; }
    std::size_t col_total(std::size_t j) const { return col_totals_[j]; }
    std::size_t total() const { return total_; }
    double expected(std::size_t i, std::size_t j) const;

private:
    std::vector<std::vector<std::size_t>> counts_;
    std::vector<std::size_t> row_totals_;
    std::vector<std::size_t> col_totals_;
    std::size_t total_ = 0;
};

/// sum_ij (A_ij - E_ij)^2 / E_ij over cells with E_ij > 0.
double chi2_statistic(const ContingencyTable& table);

/// Equal-width bins over the feature's range; a value on an interior edge
/// falls into the lower bin; empty bins are dropped.
ContingencyTable discretize(std::span<const double> feature, std::span<const int> labels, std::size_t bins);

/// One score per column; constant columns score 0 with a warning, appended
/// to `warnings` when given and sent to warn() otherwise.
std::vector<double> chi2_scores(const FeatureMatrix& features, std::span<const int> labels, std::size_t bins = 10,
                                std::vector<std::string>* warnings = nullptr);

// ---------------------------------------------------------------------------
// CART forest

enum class TreeTask { regression, classification };

struct TreeNode {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    double impurity = 0.0;  // C_j: variance or Gini
    double weight = 0.0;    // w_j: fraction of the tree's training samples reaching the node
    int left = -1;
    int right = -1;
    double value = 0.0;  // mean target, or fraction of class 1
    std::size_t samples = 0;

    bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    std::size_t split_count() const;
    double predict(const FeatureMatrix& features, std::size_t row) const;
};

struct ForestConfig {
    std::size_t trees = 100;
    std::size_t max_depth = 8;
    std::size_t min_leaf = 1;
    std::uint64_t seed = 0;
    std::optional<TreeTask> task;  // unset: classification iff targets are all 0/1
    std::optional<std::size_t> max_features;  // unset: floor(sqrt(p)), at least 1
    std::size_t threads = 1;
};

struct Forest {
    std::vector<DecisionTree> trees;
    TreeTask task = TreeTask::regression;
    std::size_t features = 0;
    std::uint64_t seed = 0;

    double predict(const FeatureMatrix& features, std::size_t row) const;
};

TreeTask infer_task(std::span<const double> targets);

Forest fit_forest(const FeatureMatrix& features, std::span<const double> targets, const ForestConfig& config);
Forest fit_forest(const FeatureFrame& frame, std::span<const double> targets, const ForestConfig& config);

/// ni_j = w_j C_j - w_left C_left - w_right C_right.
double node_importance(const DecisionTree& tree, std::size_t node);

/// fi_i = sum of ni over nodes splitting on i / sum of ni over all split
/// nodes, then normalised to sum to one. All zeros for a tree with no splits.
std::vector<double> tree_importance(const DecisionTree& tree, std::size_t features);

/// Mean of the normalised per-tree importances over trees that split.
/// Uniform (with a warning) when no tree splits.
std::vector<double> forest_importance(const Forest& forest, std::vector<std::string>* warnings = nullptr);

// ---------------------------------------------------------------------------
// Selectors

enum class Method { chi2, rfe, embedded };

const char* to_string(Method method);
Method parse_method(const std::string& text);

struct SelectionResult {
    Method method = Method::chi2;
    std::map<std::string, double> scores;
    std::vector<std::string> selected;  // most relevant first
    std::size_t k = 0;
    std::vector<std::string> warnings;
};

SelectionResult select_chi2(const FeatureMatrix& features, std::span<const int> labels, std::size_t k,
                            std::size_t bins = 10);

/// Repeatedly fits a forest and drops the `step` least important features
/// until k remain. scores[f] is the round in which f was eliminated (1 =
/// first); survivors score rounds + 1.
SelectionResult rfe(const FeatureMatrix& features, std::span<const double> targets, std::size_t k,
                    std::size_t step, const ForestConfig& forest);

/// Forest importance ranking, greedily skipping any feature whose absolute
/// Pearson correlation with an accepted feature exceeds corr_cap.
SelectionResult embedded_select(const FeatureMatrix& features, std::span<const double> targets, std::size_t k,
                                double corr_cap, const ForestConfig& forest);

/// Pearson correlation; 0 when either side is constant.
double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace wavestack::featsel
