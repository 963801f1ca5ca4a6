#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deepcso/data.hpp"

namespace deepcso {

/// Upstream station feeding a downstream one after `delay` steps.
struct Route {
  Eigen::Index upstream = 0;
  Eigen::Index downstream = 0;
  Eigen::Index delay = 1;
  double gain = 0.0;
};

/// Synthetic catchment: one rain gauge over a cascade of linear reservoirs
///
///   h_i(t+1) = min(hmax_i, max(0, a_i h_i(t) + b_i r(t-1)
///                                  + sum_up c h_up(t + 1 - d) + noise))
///
/// with storms arriving as a Bernoulli(storm_rate) process, geometric
/// durations and exponential intensities. A route's delay d is the full
/// transport time: upstream level at t reaches the downstream update at t + d.
struct CatchmentConfig {
  Eigen::Index num_stations = 8;
  Eigen::Index steps = 27756;
  std::int64_t step_seconds = 600;
  TimePoint start = std::chrono::sys_days{std::chrono::year{2014} / 3 / 19};
  double storm_rate = 0.0;
  double storm_mean_duration = 1.0;  // steps
  double storm_mean_intensity = 1.0;
  std::vector<double> recession;  // a_i in (0, 1)
  std::vector<double> rain_gain;  // b_i
  std::vector<double> hmax;       // weir cap
  std::vector<Route> routes;
  double noise_scale = 0.0;
  std::uint64_t seed = 2014;

  /// Eight stations whose mean and maximum levels fall inside the observed
  /// ranges of the Drammen network (means 0.06-1.46 m, maxima 0.75-3.3 m).
  static CatchmentConfig defaults();
  void validate() const;
};

std::string station_id(Eigen::Index station);  // "cso_1", ...
inline const char* kRainChannel = "rain_1";

TimeSeriesFrame generate(const CatchmentConfig& config);

enum class BaselineKind { persistence, linear_ar };
const char* to_string(BaselineKind kind);
BaselineKind parse_baseline_kind(const std::string& name);

struct BaselineSpec {
  BaselineKind kind = BaselineKind::linear_ar;
  Eigen::Index lag_order = 6;
  std::vector<Eigen::Index> station_lag_orders;  // optional per-station override
  double ridge = 1e-6;
};

/// Single-station linear predictor: target = intercept + sum_k coef[k] * x(t - k),
/// where x is the station's own level inside the window.
struct StationPredictor {
  std::string station;
  Eigen::Index input_column = 0;
  VectorXd coefficients;
  double intercept = 0.0;
};

struct BaselineModel {
  BaselineSpec spec;
  std::vector<StationPredictor> stations;
};

BaselineModel baseline_fit(const WindowedDataset& dataset, const BaselineSpec& spec);
/// Scaled predictions, (stations x samples).
MatrixXd baseline_predict(const BaselineModel& model, const WindowedDataset& dataset);

}  // namespace deepcso
