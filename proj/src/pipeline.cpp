#include "deepcso/pipeline.hpp"

#include <cmath>

namespace deepcso {

PreparedFrame prepare_frame(const TimeSeriesFrame& raw, const PipelineOptions& options) {
  if (!(options.val_fraction > 0.0 && options.val_fraction < 1.0)) {
    throw SplitError("validation fraction must lie strictly between 0 and 1");
  }
  const TimeSeriesFrame filled = fill_gaps(raw, options.max_gap);
  PreparedFrame out;
  out.train_rows = leading_rows(filled, options.train_fraction);
  out.scaler = fit_scaler(filled, out.train_rows);
  out.lags = select_lags(filled, out.train_rows, options.lag_policy);
  out.scaled = scale(filled, out.scaler);
  out.stations = filled.channel_ids(ChannelKind::level);
  return out;
}

PreparedData prepare_windows(const PreparedFrame& frame, Eigen::Index horizon,
                             const PipelineOptions& options) {
  const WindowedDataset all = make_windows(frame.scaled, frame.lags, horizon, frame.stations);
  Eigen::Index n_fit = 0;
  while (n_fit < all.size() &&
         all.source_index[static_cast<std::size_t>(n_fit)] + horizon < frame.train_rows.end) {
    ++n_fit;
  }
  const auto n_val = static_cast<Eigen::Index>(
      std::ceil(static_cast<double>(n_fit) * options.val_fraction));
  if (n_fit - n_val < 1 || n_val < 1) {
    throw SplitError("training rows yield " + std::to_string(n_fit) +
                     " windows, too few for a train/validation split");
  }
  if (n_fit == all.size()) throw SplitError("no windows left for the test split");
  PreparedData out;
  out.train = all.slice(0, n_fit - n_val);
  out.val = all.slice(n_fit - n_val, n_fit);
  out.test = all.slice(n_fit, all.size());
  return out;
}

}  // namespace deepcso
