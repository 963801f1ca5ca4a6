#pragma once

#include <string>
#include <vector>

#include "deepcso/data.hpp"

namespace deepcso {

struct PipelineOptions {
  double train_fraction = 0.8;
  // Tail of the training windows held out for early stopping.
  double val_fraction = 0.1;
  Eigen::Index max_gap = 3;
  LagPolicy lag_policy;
};

/// Scaler and lags are fitted on the leading `train_fraction` rows only.
struct PreparedFrame {
  TimeSeriesFrame scaled;
  ScalerParams scaler;
  LagSpec lags;
  RowRange train_rows;
  std::vector<std::string> stations;
};

struct PreparedData {
  WindowedDataset train;
  WindowedDataset val;
  WindowedDataset test;
};

PreparedFrame prepare_frame(const TimeSeriesFrame& raw, const PipelineOptions& options);

/// Windows whose target row lies inside the training rows go to train/val
/// (val = chronological tail), the rest to test.
PreparedData prepare_windows(const PreparedFrame& frame, Eigen::Index horizon,
                             const PipelineOptions& options);

}  // namespace deepcso
