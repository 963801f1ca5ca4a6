#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "deepcso/cells.hpp"
#include "deepcso/data.hpp"
#include "deepcso/optim.hpp"

namespace deepcso {

/// Shape of the multi-task network: stacked hidden layers shared by every
/// station, then one linear output per station.
struct ModelConfig {
  CellKind cell_kind = CellKind::gru;
  Eigen::Index hidden_size = 512;
  Eigen::Index num_recurrent_layers = 2;
  Eigen::Index num_stations = 8;
  Eigen::Index lookback = 12;
  Eigen::Index horizon = 1;
  double dropout_ratio = 0.2;
  Eigen::Index input_channels = 9;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Every trainable array of a model; also used to hold gradients.
struct ParameterSet {
  std::vector<CellParams<double>> layers;
  MatrixXd out_weights;  // stations x hidden
  VectorXd out_bias;

  Eigen::Index size() const;
  ParameterSet zeros_like() const;
  VectorXd pack() const;
  void unpack(const VectorXd& flat);

  /// Visits (name, array) in packing order. Names look like
  /// "layer1.update.weights" or "dense.bias".
  void for_each_block(const std::function<void(const std::string&, Eigen::Ref<MatrixXd>)>& visit);
  void for_each_block(
      const std::function<void(const std::string&, Eigen::Ref<const MatrixXd>)>& visit) const;

  bool operator==(const ParameterSet& other) const;
};

struct Model {
  ModelConfig config;
  ParameterSet params;
};

/// Layer 1 sees input_channels (or lookback * input_channels flattened, for
/// ffnn); later layers see hidden_size. Parameters drawn from config.seed.
Model build_model(const ModelConfig& config);

/// A batch laid out for the network: `steps[s]` is (channels x batch) at
/// window position s; `targets` is (stations x batch).
struct Batch {
  std::vector<MatrixXd> steps;
  MatrixXd targets;

  Eigen::Index size() const { return targets.cols(); }
};

Batch make_batch(const WindowedDataset& dataset, std::span<const Eigen::Index> indices);
Batch make_batch(const WindowedDataset& dataset);

/// Inverted dropout: zero with probability `ratio`, scale survivors by 1/(1-ratio).
VectorXd apply_dropout(const VectorXd& v, double ratio, SeededRng& rng, bool training);

/// One window (lookback x input_channels) to num_stations scaled outputs.
/// `rng` feeds dropout and is required when training with dropout > 0.
VectorXd forward(const Model& model, const MatrixXd& window, bool training,
                 SeededRng* rng = nullptr);

/// Eval-mode predictions, (stations x batch).
MatrixXd predict(const Model& model, const std::vector<MatrixXd>& steps);
MatrixXd predict(const Model& model, const WindowedDataset& dataset);

struct Loss {
  double value = 0.0;
  VectorXd grad;
};

/// Mean squared error over stations, and its gradient w.r.t. `pred`.
Loss mse_loss(const VectorXd& pred, const VectorXd& target);

struct BpttResult {
  double loss = 0.0;
  ParameterSet grads;
};

/// Mean batch loss and its exact gradient, back through every window step and
/// layer. With dropout > 0, `rng` draws the mask (pass nullptr for dropout-free eval).
BpttResult bptt(const Model& model, const Batch& batch, SeededRng* rng = nullptr);

/// Eval-mode mean squared error over a dataset.
double dataset_loss(const Model& model, const WindowedDataset& dataset);

struct FitOptions {
  OptimizerSpec optimizer;
  Eigen::Index epochs = 200;
  Eigen::Index batch_size = 1024;
  Eigen::Index patience = 10;  // 0 disables early stopping
};

enum class StopReason { max_epochs, early_stop };
const char* to_string(StopReason reason);

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  double initial_val_loss = 0.0;
  Eigen::Index epochs_run = 0;
  Eigen::Index best_epoch = 0;  // 1-based; 0 when no epoch ran
  StopReason stop_reason = StopReason::max_epochs;
  double wall_seconds = 0.0;

  double best_val_loss() const;
};

using EpochCallback = std::function<void(Eigen::Index epoch, double train_loss, double val_loss)>;

/// Shuffled mini-batch training with early stopping on validation loss; the
/// best-validation parameters are restored before returning.
TrainReport fit(Model& model, const WindowedDataset& train, const WindowedDataset& val,
                const FitOptions& options, SeededRng& rng, const EpochCallback& on_epoch = {});

}  // namespace deepcso
