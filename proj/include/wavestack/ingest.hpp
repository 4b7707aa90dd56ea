#pragma once

#include "wavestack/date.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace wavestack {

/// Missing cells are stored as quiet NaN.
bool is_missing(double value) noexcept;
double missing_value() noexcept;

struct TimeSeries {
    std::string name;
    std::vector<Date> timestamps;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    /// Throws StructureError unless timestamps strictly increase and sizes match.
    void validate() const;
};

/// Named feature columns over one shared daily axis. Column order is
/// insertion order; the target names the price column.
class FeatureFrame {
public:
    FeatureFrame() = default;
    FeatureFrame(std::vector<Date> dates, std::string target);

    void add_column(std::string name, std::vector<double> values);
    void set_column(const std::string& name, std::vector<double> values);

    std::size_t rows() const noexcept { return dates_.size(); }
    std::size_t cols() const noexcept { return columns_.size(); }
    const std::vector<Date>& dates() const noexcept { return dates_; }
    const std::string& target() const noexcept { return target_; }
    const std::vector<std::string>& names() const noexcept { return names_; }

    bool has_column(const std::string& name) const;
    std::size_t index_of(const std::string& name) const;
    const std::vector<double>& column(const std::string& name) const;
    const std::vector<double>& column(std::size_t index) const { return columns_.at(index); }
    const std::vector<double>& target_values() const { return column(target_); }
    TimeSeries series(const std::string& name) const;

    /// Rows [begin, end).
    FeatureFrame slice_rows(std::size_t begin, std::size_t end) const;
    /// Keep only the named columns (target is always kept).
    FeatureFrame select_columns(std::span<const std::string> names) const;
    std::size_t count_missing() const;

    /// Axis strictly increasing, target present, names unique, equal lengths.
    void validate() const;

    friend bool operator==(const FeatureFrame& a, const FeatureFrame& b);

private:
    std::vector<Date> dates_;
    std::string target_;
    std::vector<std::string> names_;
    std::vector<std::vector<double>> columns_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Loads a `date,...` CSV. `schema` lists the feature columns to keep (empty =
/// all; the target is always kept). Empty cells become missing; rows are sorted
/// by date.
FeatureFrame load_csv(const std::filesystem::path& path, std::span<const std::string> schema = {},
                      const std::string& target = "price");

void write_csv(const std::filesystem::path& path, const FeatureFrame& frame);

/// Interior gaps: linear interpolation between nearest present neighbours.
/// Edge gaps: flat extension of the nearest present value. ImputationError when
/// a column has no present value.
std::vector<double> interpolate_values(std::span<const double> values, const std::string& name = "");
FeatureFrame interpolate_missing(const FeatureFrame& frame);

struct IsolationForestConfig {
    std::size_t trees = 100;
    /// Unset: min(256, rows). Set explicitly above the row count: error.
    std::optional<std::size_t> subsample;
    double contamination = 0.01;
    std::uint64_t seed = 0;
};

/// Average path length of an unsuccessful BST search over n points.
double average_path_length(std::size_t n);

class IsolationForest {
public:
    struct Node {
        int feature = -1;  // -1: external node
        double split = 0.0;
        int left = -1;
        int right = -1;
        std::size_t size = 0;
    };
    using Tree = std::vector<Node>;

    /// `rows` is row-major: rows.size() samples of equal width.
    void fit(std::span<const std::vector<double>> rows, const IsolationForestConfig& config);

    double path_length(std::span<const double> row, const Tree& tree) const;
    /// s(x) = 2^(-E[h(x)] / c(psi)).
    double score(std::span<const double> row) const;

    const std::vector<Tree>& trees() const noexcept { return trees_; }
    std::size_t subsample_size() const noexcept { return subsample_; }

private:
    std::vector<Tree> trees_;
    std::size_t subsample_ = 0;
};

struct OutlierResult {
    FeatureFrame frame;
    std::vector<std::size_t> flagged;  // ascending row indices
};

/// Flags the ceil(contamination * rows) highest-scoring rows and replaces
/// them by interpolation of their neighbours.
OutlierResult isolation_forest_filter(const FeatureFrame& frame, const IsolationForestConfig& config);

/// Rows of a frame as row-major vectors (all columns, frame order).
std::vector<std::vector<double>> frame_rows(const FeatureFrame& frame);

/// label[t] = 1 if price[t + h] > price[t], else 0 (ties -> 0). Length n - h.
std::vector<int> make_labels(std::span<const double> prices, std::size_t horizon_days);
TimeSeries make_labels(const TimeSeries& prices, std::size_t horizon_days);

/// target[t] = price[t + h]. Length n - h.
std::vector<double> make_regression_targets(std::span<const double> prices, std::size_t horizon_days);
TimeSeries make_regression_targets(const TimeSeries& prices, std::size_t horizon_days);

struct DateInterval {
    std::string name;
    Date begin;
    Date end;  // inclusive
};

/// The three fixed dataset ranges: I, II, III.
std::optional<DateInterval> named_interval(const std::string& name);

struct SplitSpec {
    double train_fraction = 0.8;
    std::optional<DateInterval> interval;
    std::size_t horizon_days = 1;

    void validate() const;
};

/// Restricts to spec.interval (when set), then the first
/// floor(train_fraction * n) rows train and the rest test.
std::pair<FeatureFrame, FeatureFrame> chronological_split(const FeatureFrame& frame, const SplitSpec& spec);

/// Rows of `frame` inside the inclusive date range; SizeError if the range
/// falls outside the frame's dates.
FeatureFrame restrict_to_interval(const FeatureFrame& frame, const DateInterval& interval);

std::size_t train_rows(std::size_t rows, double train_fraction);

}  // namespace wavestack
