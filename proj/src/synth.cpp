#include "deepcso/synth.hpp"

#include <algorithm>
#include <functional>

namespace deepcso {

CatchmentConfig CatchmentConfig::defaults() {
  CatchmentConfig c;
  c.storm_rate = 0.006;
  c.storm_mean_duration = 18.0;
  c.storm_mean_intensity = 1.0;
  // Headwater stations (1, 2, 4, 6) are slow and rain-fed; the rest mostly
  // pass routed flow on with little storage.
  c.recession = {0.93, 0.92, 0.40, 0.90, 0.50, 0.94, 0.40, 0.45};
  c.rain_gain = {0.10, 0.10, 0.005, 0.10, 0.005, 0.08, 0.005, 0.005};
  c.hmax = {1.66, 1.14, 1.14, 1.77, 3.3, 1.15, 0.75, 0.9};
  c.routes = {
      {0, 2, 2, 0.30}, {1, 2, 2, 0.30}, {2, 4, 2, 0.25},
      {3, 4, 5, 0.25}, {5, 6, 2, 0.50}, {6, 7, 2, 0.55},
  };
  c.noise_scale = 0.004;
  return c;
}

void CatchmentConfig::validate() const {
  if (num_stations < 1) throw ConfigError("catchment: num_stations must be >= 1");
  if (steps < 1) throw ConfigError("catchment: steps must be >= 1");
  if (step_seconds <= 0) throw ConfigError("catchment: step_seconds must be > 0");
  if (!(storm_rate >= 0.0 && storm_rate <= 1.0)) {
    throw ConfigError("catchment: storm_rate must lie in [0, 1]");
  }
  if (!(storm_mean_duration >= 1.0)) throw ConfigError("catchment: storm_mean_duration must be >= 1");
  if (!(storm_mean_intensity > 0.0)) throw ConfigError("catchment: storm_mean_intensity must be > 0");
  if (!(noise_scale >= 0.0)) throw ConfigError("catchment: noise_scale must be >= 0");
  const auto n = static_cast<std::size_t>(num_stations);
  if (recession.size() != n || rain_gain.size() != n || hmax.size() != n) {
    throw ConfigError("catchment: recession, rain_gain and hmax need one entry per station");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(recession[i] > 0.0 && recession[i] < 1.0)) {
      throw ConfigError("catchment: recession of station " + std::to_string(i + 1) +
                        " must lie in (0, 1)");
    }
    if (!(hmax[i] > 0.0)) {
      throw ConfigError("catchment: hmax of station " + std::to_string(i + 1) + " must be > 0");
    }
  }
  std::vector<std::vector<Eigen::Index>> down(n);
  for (const auto& r : routes) {
    if (r.upstream < 0 || r.upstream >= num_stations || r.downstream < 0 ||
        r.downstream >= num_stations) {
      throw ConfigError("catchment: route references an unknown station");
    }
    if (r.delay < 1) throw ConfigError("catchment: route delays must be >= 1");
    down[static_cast<std::size_t>(r.upstream)].push_back(r.downstream);
  }
  // Depth-first cycle check.
  std::vector<int> mark(n, 0);
  std::function<void(std::size_t)> visit = [&](std::size_t u) {
    mark[u] = 1;
    for (auto v : down[u]) {
      const auto w = static_cast<std::size_t>(v);
      if (mark[w] == 1) throw ConfigError("catchment: routing graph has a cycle");
      if (mark[w] == 0) visit(w);
    }
    mark[u] = 2;
  };
  for (std::size_t u = 0; u < n; ++u) {
    if (mark[u] == 0) visit(u);
  }
}

std::string station_id(Eigen::Index station) { return "cso_" + std::to_string(station + 1); }

TimeSeriesFrame generate(const CatchmentConfig& config) {
  config.validate();
  const Eigen::Index n = config.num_stations;
  const Eigen::Index steps = config.steps;
  SeededRng rng(config.seed);

  VectorXd rain = VectorXd::Zero(steps);
  Eigen::Index storm_left = 0;
  double intensity = 0.0;
  const double end_prob = 1.0 / config.storm_mean_duration;
  for (Eigen::Index t = 0; t < steps; ++t) {
    if (storm_left == 0 && config.storm_rate > 0.0 && rng.bernoulli(config.storm_rate)) {
      storm_left = 1;
      while (!rng.bernoulli(end_prob)) ++storm_left;
      intensity = rng.exponential(config.storm_mean_intensity);
    }
    if (storm_left > 0) {
      rain(t) = intensity;
      --storm_left;
    }
  }

  MatrixXd level = MatrixXd::Zero(steps, n);
  for (Eigen::Index t = 0; t + 1 < steps; ++t) {
    const double r_prev = t >= 1 ? rain(t - 1) : 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto si = static_cast<std::size_t>(i);
      double next = config.recession[si] * level(t, i) + config.rain_gain[si] * r_prev;
      for (const auto& route : config.routes) {
        const Eigen::Index source = t + 1 - route.delay;
        if (route.downstream != i || source < 0) continue;
        next += route.gain * level(source, route.upstream);
      }
      if (config.noise_scale > 0.0) next += config.noise_scale * rng.normal();
      level(t + 1, i) = std::min(config.hmax[si], std::max(0.0, next));
    }
  }

  TimeSeriesFrame frame;
  frame.start = config.start;
  frame.step_seconds = config.step_seconds;
  frame.values.resize(steps, n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    frame.channels.push_back({station_id(i), ChannelKind::level});
    frame.values.col(i) = level.col(i);
  }
  frame.channels.push_back({kRainChannel, ChannelKind::rain});
  frame.values.col(n) = rain;
  frame.validate();
  return frame;
}

const char* to_string(BaselineKind kind) {
  return kind == BaselineKind::persistence ? "persistence" : "linear_ar";
}

BaselineKind parse_baseline_kind(const std::string& name) {
  if (name == "persistence") return BaselineKind::persistence;
  if (name == "linear_ar") return BaselineKind::linear_ar;
  throw InvalidArgument("unknown baseline '" + name + "' (expected persistence|linear_ar)");
}

namespace {

Eigen::Index station_column(const WindowedDataset& dataset, const std::string& station) {
  const auto it =
      std::find(dataset.input_channels.begin(), dataset.input_channels.end(), station);
  if (it == dataset.input_channels.end()) {
    throw SchemaError("baseline: station '" + station + "' is not among the input channels");
  }
  return static_cast<Eigen::Index>(it - dataset.input_channels.begin());
}

// Lagged own-station features, column k holding x(t - k).
MatrixXd lag_features(const WindowedDataset& dataset, Eigen::Index column, Eigen::Index order) {
  MatrixXd x(dataset.size(), order);
  for (Eigen::Index s = 0; s < dataset.size(); ++s) {
    const MatrixXd& window = dataset.inputs[static_cast<std::size_t>(s)];
    for (Eigen::Index k = 0; k < order; ++k) x(s, k) = window(dataset.lookback - 1 - k, column);
  }
  return x;
}

}  // namespace

BaselineModel baseline_fit(const WindowedDataset& dataset, const BaselineSpec& spec) {
  if (dataset.empty()) throw InvalidArgument("baseline_fit: empty dataset");
  if (spec.lag_order < 1) throw ConfigError("baseline: lag order must be >= 1");
  if (!(spec.ridge >= 0.0)) throw ConfigError("baseline: ridge penalty must be >= 0");
  if (!spec.station_lag_orders.empty() &&
      spec.station_lag_orders.size() != dataset.target_channels.size()) {
    throw ConfigError("baseline: per-station lag orders need one entry per station");
  }
  BaselineModel model{spec, {}};
  for (std::size_t s = 0; s < dataset.target_channels.size(); ++s) {
    StationPredictor p;
    p.station = dataset.target_channels[s];
    p.input_column = station_column(dataset, p.station);
    if (spec.kind == BaselineKind::persistence) {
      p.coefficients = VectorXd::Unit(1, 0);
      model.stations.push_back(std::move(p));
      continue;
    }
    const Eigen::Index order =
        spec.station_lag_orders.empty() ? spec.lag_order : spec.station_lag_orders[s];
    if (order < 1 || order > dataset.lookback) {
      throw ConfigError("baseline: lag order " + std::to_string(order) + " for '" + p.station +
                        "' must lie in [1, lookback]");
    }
    const MatrixXd x = lag_features(dataset, p.input_column, order);
    const VectorXd y = dataset.targets.row(static_cast<Eigen::Index>(s)).transpose();
    const Eigen::RowVectorXd x_mean = x.colwise().mean();
    const double y_mean = y.mean();
    const MatrixXd xc = x.rowwise() - x_mean;
    const VectorXd yc = y.array() - y_mean;
    MatrixXd normal = xc.transpose() * xc;
    normal.diagonal().array() += spec.ridge;
    const VectorXd rhs = xc.transpose() * yc;
    Eigen::FullPivLU<MatrixXd> lu(normal);
    if (!lu.isInvertible()) {
      throw SingularSystemError("baseline: normal equations for '" + p.station +
                                "' are singular; use a ridge penalty > 0");
    }
    p.coefficients = lu.solve(rhs);
    p.intercept = y_mean - x_mean.dot(p.coefficients);
    model.stations.push_back(std::move(p));
  }
  return model;
}

MatrixXd baseline_predict(const BaselineModel& model, const WindowedDataset& dataset) {
  if (model.stations.size() != dataset.target_channels.size()) {
    throw ShapeError("baseline_predict: model has " + std::to_string(model.stations.size()) +
                     " stations, dataset " + std::to_string(dataset.target_channels.size()));
  }
  MatrixXd out(static_cast<Eigen::Index>(model.stations.size()), dataset.size());
  for (std::size_t s = 0; s < model.stations.size(); ++s) {
    const auto& p = model.stations[s];
    const Eigen::Index column = station_column(dataset, p.station);
    const Eigen::Index order = p.coefficients.size();
    if (order > dataset.lookback) throw ShapeError("baseline_predict: window too short");
    out.row(static_cast<Eigen::Index>(s)) =
        ((lag_features(dataset, column, order) * p.coefficients).array() + p.intercept)
            .transpose();
  }
  return out;
}

}  // namespace deepcso
