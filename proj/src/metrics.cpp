#include "deepcso/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "deepcso/model.hpp"

namespace deepcso {

namespace {

void check_lengths(const Eigen::Ref<const VectorXd>& obs, const Eigen::Ref<const VectorXd>& sim,
                   Eigen::Index min_length, const char* what) {
  if (obs.size() != sim.size()) {
    throw ShapeError(std::string(what) + ": observed has " + std::to_string(obs.size()) +
                     " values, simulated " + std::to_string(sim.size()));
  }
  if (obs.size() < min_length) {
    throw InvalidArgument(std::string(what) + ": needs at least " + std::to_string(min_length) +
                          " values");
  }
}

double sum_sq_dev(const Eigen::Ref<const VectorXd>& v) {
  return (v.array() - v.mean()).square().sum();
}

// Exact test; a constant series can leave a rounding-sized deviation sum.
bool is_constant(const Eigen::Ref<const VectorXd>& v) { return v.minCoeff() == v.maxCoeff(); }

}  // namespace

double cc(const Eigen::Ref<const VectorXd>& obs, const Eigen::Ref<const VectorXd>& sim) {
  check_lengths(obs, sim, 2, "cc");
  if (is_constant(obs) || is_constant(sim)) throw DegenerateError("cc: zero-variance series");
  const VectorXd dobs = obs.array() - obs.mean();
  const VectorXd dsim = sim.array() - sim.mean();
  const double sobs = dobs.squaredNorm();
  const double ssim = dsim.squaredNorm();
  if (sobs == 0.0 || ssim == 0.0) throw DegenerateError("cc: zero-variance series");
  const double r = dsim.dot(dobs) / (std::sqrt(ssim) * std::sqrt(sobs));
  return std::clamp(r, -1.0, 1.0);
}

double rmse(const Eigen::Ref<const VectorXd>& obs, const Eigen::Ref<const VectorXd>& sim) {
  check_lengths(obs, sim, 1, "rmse");
  return std::sqrt((obs - sim).squaredNorm() / static_cast<double>(obs.size()));
}

double nse(const Eigen::Ref<const VectorXd>& obs, const Eigen::Ref<const VectorXd>& sim) {
  check_lengths(obs, sim, 2, "nse");
  const double denom = sum_sq_dev(obs);
  if (is_constant(obs) || denom == 0.0) throw DegenerateError("nse: observed series is constant");
  return 1.0 - (obs - sim).squaredNorm() / denom;
}

const StationMetrics& MetricsReport::at(const std::string& station) const {
  for (const auto& s : stations) {
    if (s.station == station) return s;
  }
  throw SchemaError("report has no station '" + station + "'");
}

double MetricsReport::mean_nse() const {
  double sum = 0.0;
  int count = 0;
  for (const auto& s : stations) {
    if (s.nse) {
      sum += *s.nse;
      ++count;
    }
  }
  if (count == 0) throw DegenerateError("mean_nse: no station has a valid NSE");
  return sum / count;
}

MetricsReport evaluate_predictions(const MatrixXd& predictions, const WindowedDataset& dataset,
                                   const ScalerParams& scaler, const std::string& label) {
  if (predictions.rows() != dataset.targets.rows() ||
      predictions.cols() != dataset.targets.cols()) {
    throw ShapeError("evaluate: predictions are " + detail::shape_of(predictions) +
                     ", targets " + detail::shape_of(dataset.targets));
  }
  MetricsReport report;
  report.model = label;
  report.horizon = dataset.horizon;
  report.n = dataset.size();
  for (std::size_t s = 0; s < dataset.target_channels.size(); ++s) {
    const auto row = static_cast<Eigen::Index>(s);
    StationMetrics m;
    m.station = dataset.target_channels[s];
    const auto& channel = scaler.at(m.station);
    const VectorXd obs = unscale(VectorXd(dataset.targets.row(row).transpose()), channel);
    const VectorXd sim = unscale(VectorXd(predictions.row(row).transpose()), channel);
    try {
      m.rmse = rmse(obs, sim);
      m.cc = cc(obs, sim);
      m.nse = nse(obs, sim);
    } catch (const Error& e) {
      m.cc.reset();
      m.nse.reset();
      m.error = e.what();
    }
    report.stations.push_back(std::move(m));
  }
  return report;
}

MetricsReport evaluate(const Model& model, const WindowedDataset& dataset,
                       const ScalerParams& scaler, const std::string& label) {
  if (dataset.horizon != model.config.horizon) {
    throw ConfigError("evaluate: dataset horizon " + std::to_string(dataset.horizon) +
                      " differs from model horizon " + std::to_string(model.config.horizon));
  }
  return evaluate_predictions(predict(model, dataset), dataset, scaler, label);
}

nlohmann::ordered_json to_json(const MetricsReport& report) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& s : report.stations) {
    nlohmann::ordered_json entry;
    auto put = [&entry](const char* key, const std::optional<double>& v) {
      entry[key] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    put("cc", s.cc);
    put("rmse", s.rmse);
    put("nse", s.nse);
    entry["n"] = report.n;
    entry["horizon"] = report.horizon;
    entry["model"] = report.model;
    if (!s.ok()) entry["error"] = s.error;
    doc[s.station] = std::move(entry);
  }
  return doc;
}

MetricsReport report_from_json(const nlohmann::ordered_json& doc) {
  if (!doc.is_object() || doc.empty()) throw SchemaError("report must be a non-empty object");
  MetricsReport report;
  bool first = true;
  for (const auto& [station, entry] : doc.items()) {
    StationMetrics m;
    m.station = station;
    auto get = [&entry](const char* key) -> std::optional<double> {
      if (!entry.contains(key)) throw SchemaError(std::string("report entry lacks '") + key + "'");
      const auto& v = entry.at(key);
      if (v.is_null()) return std::nullopt;
      return v.get<double>();
    };
    m.cc = get("cc");
    m.rmse = get("rmse");
    m.nse = get("nse");
    if (entry.contains("error")) m.error = entry.at("error").get<std::string>();
    const auto n = entry.at("n").get<Eigen::Index>();
    const auto horizon = entry.at("horizon").get<Eigen::Index>();
    const auto label = entry.at("model").get<std::string>();
    if (first) {
      report.n = n;
      report.horizon = horizon;
      report.model = label;
      first = false;
    } else if (n != report.n || horizon != report.horizon || label != report.model) {
      throw SchemaError("report entries disagree on n/horizon/model");
    }
    report.stations.push_back(std::move(m));
  }
  return report;
}

}  // namespace deepcso
