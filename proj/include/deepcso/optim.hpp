#pragma once

#include <cstdint>
#include <string>

#include "deepcso/numerics.hpp"

namespace deepcso {

enum class OptimizerKind { sgd, adam, rmsprop, adagrad, adadelta, adamax, nadam };

const char* to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& name);

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double rho = 0.9;       // rmsprop / adadelta decay
  double clip_norm = 0.0; // global-norm clip; 0 disables

  /// Conventional defaults for each method (Adam: lr 1e-3, betas 0.9/0.999, eps 1e-8).
  static OptimizerSpec defaults(OptimizerKind kind);
  void validate() const;
  bool operator==(const OptimizerSpec&) const = default;
};

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  VectorXd first;   // first moment (adam/adamax/nadam) or squared-update average (adadelta)
  VectorXd second;  // second moment / squared-gradient accumulator
  std::uint64_t step = 0;

  static OptimizerState init(const OptimizerSpec& spec, Eigen::Index parameter_count);
};

/// One update of the flat parameter vector in place.
void optimizer_step(Eigen::Ref<VectorXd> params, const VectorXd& grads, OptimizerState& state,
                    const OptimizerSpec& spec);

/// Rescales `grads` so its Euclidean norm is at most `max_norm`; returns the original norm.
double clip_global_norm(VectorXd& grads, double max_norm);

}  // namespace deepcso
