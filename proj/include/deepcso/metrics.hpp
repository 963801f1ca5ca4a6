#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "deepcso/data.hpp"
#include "deepcso/numerics.hpp"

namespace deepcso {

struct Model;

/// Correlation coefficient (Pearson, both series centred on their own means).
double cc(const Eigen::Ref<const VectorXd>& obs, const Eigen::Ref<const VectorXd>& sim);
/// Root mean squared error.
double rmse(const Eigen::Ref<const VectorXd>& obs, const Eigen::Ref<const VectorXd>& sim);
/// Nash-Sutcliffe efficiency: 1 - SSE / sum of squared deviations of obs from its mean.
double nse(const Eigen::Ref<const VectorXd>& obs, const Eigen::Ref<const VectorXd>& sim);

struct StationMetrics {
  std::string station;
  std::optional<double> cc;
  std::optional<double> rmse;
  std::optional<double> nse;
  std::string error;  // set when the station's series was degenerate

  bool ok() const { return error.empty(); }
};

struct MetricsReport {
  std::string model;
  Eigen::Index horizon = 1;
  Eigen::Index n = 0;
  std::vector<StationMetrics> stations;

  const StationMetrics& at(const std::string& station) const;
  /// Mean NSE over stations with valid metrics.
  double mean_nse() const;
};

/// Metrics in physical units for scaled predictions (stations x samples)
/// against the dataset's scaled targets.
MetricsReport evaluate_predictions(const MatrixXd& predictions, const WindowedDataset& dataset,
                                   const ScalerParams& scaler, const std::string& label);

MetricsReport evaluate(const Model& model, const WindowedDataset& dataset,
                       const ScalerParams& scaler, const std::string& label);

nlohmann::ordered_json to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::ordered_json& doc);

}  // namespace deepcso
