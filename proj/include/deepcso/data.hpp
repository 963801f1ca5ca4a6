#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "deepcso/numerics.hpp"

namespace deepcso {

using TimePoint = std::chrono::sys_seconds;

/// Missing observations are stored as quiet NaN; use `is_missing`.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

enum class ChannelKind { level, rain };

struct Channel {
  std::string id;
  ChannelKind kind = ChannelKind::level;
};

/// `rain_` prefix marks a rain gauge; everything else is a station level.
ChannelKind channel_kind_from_id(const std::string& id);

/// Multivariate series on a fixed time grid. `values` is (time x channel).
struct TimeSeriesFrame {
  TimePoint start{};
  std::int64_t step_seconds = 600;
  std::vector<Channel> channels;
  MatrixXd values;

  Eigen::Index length() const { return values.rows(); }
  Eigen::Index channel_count() const { return values.cols(); }
  TimePoint time_at(Eigen::Index row) const {
    return start + std::chrono::seconds(step_seconds * row);
  }
  std::optional<Eigen::Index> find_channel(const std::string& id) const;
  Eigen::Index channel_index(const std::string& id) const;  // throws SchemaError
  std::vector<std::string> channel_ids(std::optional<ChannelKind> kind = std::nullopt) const;
  Eigen::Index missing_count() const;
  void validate() const;
};

TimePoint parse_timestamp(const std::string& text);
std::string format_timestamp(TimePoint t);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

TimeSeriesFrame read_csv(std::istream& in, std::int64_t expected_step = 600);
TimeSeriesFrame load_csv(const std::string& path, std::int64_t expected_step = 600);
void write_csv(const TimeSeriesFrame& frame, std::ostream& out);
void save_csv(const TimeSeriesFrame& frame, const std::string& path);

/// Writes `contents` to `path` via a sibling temporary and rename, so a
/// failed write leaves no partial file.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

/// Forward-fill runs of at most `max_gap` missing values that follow an observation.
TimeSeriesFrame fill_gaps(const TimeSeriesFrame& frame, Eigen::Index max_gap);

/// Half-open row range [begin, end).
struct RowRange {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;
  Eigen::Index size() const { return end - begin; }
};

RowRange leading_rows(const TimeSeriesFrame& frame, double fraction);

struct ChannelScale {
  std::string id;
  ChannelKind kind = ChannelKind::level;
  double min = 0.0;
  double max = 1.0;

  double scale(double v) const { return (v - min) / (max - min); }
  double unscale(double v) const { return v * (max - min) + min; }
  bool operator==(const ChannelScale&) const = default;
};

struct ScalerParams {
  std::vector<ChannelScale> channels;

  const ChannelScale& at(const std::string& id) const;
  std::vector<std::string> ids(std::optional<ChannelKind> kind = std::nullopt) const;
  bool operator==(const ScalerParams&) const = default;
};

ScalerParams fit_scaler(const TimeSeriesFrame& frame, RowRange train_rows);
TimeSeriesFrame scale(const TimeSeriesFrame& frame, const ScalerParams& scaler);
TimeSeriesFrame unscale(const TimeSeriesFrame& frame, const ScalerParams& scaler);
VectorXd unscale(const VectorXd& values, const ChannelScale& channel);

/// Lag-l correlation between x[t] and x[t+l], l = 0..max_lag, pairs with a
/// missing side skipped.
VectorXd autocorrelation(const VectorXd& series, Eigen::Index max_lag);
/// Lag-l correlation between a[t] and b[t+l].
VectorXd cross_correlation(const VectorXd& a, const VectorXd& b, Eigen::Index max_lag);

struct LagPolicy {
  double acf_threshold = 0.36787944117144233;  // 1/e
  Eigen::Index lookback_cap = 24;
  Eigen::Index top_m = 3;
  double significance_z = 1.96;
  // Divide the two-sided 5% level by the number of (lag, station) tests.
  bool bonferroni = true;
  // When set, the window is exactly this long and lags are capped to fit.
  std::optional<Eigen::Index> fixed_lookback;
};

struct ChannelLags {
  std::string id;
  std::vector<Eigen::Index> lags;
  bool operator==(const ChannelLags&) const = default;
};

/// Selected input channels (sorted by id) and the resulting window length.
struct LagSpec {
  std::vector<ChannelLags> channels;
  Eigen::Index lookback = 1;

  std::vector<std::string> input_ids() const;
  const ChannelLags* find(const std::string& id) const;
  void validate() const;
  bool operator==(const LagSpec&) const = default;
};

LagSpec select_lags(const TimeSeriesFrame& frame, RowRange train_rows,
                    const LagPolicy& policy = {});

/// Supervised samples: each input is a (lookback x input channel) window whose
/// last row is time t; the target column holds the stations at t + horizon.
struct WindowedDataset {
  std::vector<std::string> input_channels;
  std::vector<std::string> target_channels;
  Eigen::Index lookback = 1;
  Eigen::Index horizon = 1;
  std::vector<MatrixXd> inputs;
  MatrixXd targets;                       // stations x samples
  std::vector<Eigen::Index> source_index; // t for each sample

  Eigen::Index size() const { return static_cast<Eigen::Index>(inputs.size()); }
  bool empty() const { return inputs.empty(); }
  WindowedDataset slice(Eigen::Index begin, Eigen::Index end) const;
};

WindowedDataset make_windows(const TimeSeriesFrame& frame, const LagSpec& lags,
                             Eigen::Index horizon,
                             const std::vector<std::string>& target_channels);

/// The (lookback x input channel) window whose last row is `t`.
MatrixXd window_at(const TimeSeriesFrame& frame, const LagSpec& lags, Eigen::Index t);

std::pair<WindowedDataset, WindowedDataset> chrono_split(const WindowedDataset& dataset,
                                                         double train_fraction);

}  // namespace deepcso
