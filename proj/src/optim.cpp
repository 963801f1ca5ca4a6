#include "deepcso/optim.hpp"

#include <cmath>

namespace deepcso {

const char* to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::rmsprop: return "rmsprop";
    case OptimizerKind::adagrad: return "adagrad";
    case OptimizerKind::adadelta: return "adadelta";
    case OptimizerKind::adamax: return "adamax";
    case OptimizerKind::nadam: return "nadam";
  }
  return "?";
}

OptimizerKind parse_optimizer_kind(const std::string& name) {
  for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam, OptimizerKind::rmsprop,
                    OptimizerKind::adagrad, OptimizerKind::adadelta, OptimizerKind::adamax,
                    OptimizerKind::nadam}) {
    if (name == to_string(kind)) return kind;
  }
  throw InvalidArgument("unknown optimizer '" + name +
                        "' (expected sgd|adam|rmsprop|adagrad|adadelta|adamax|nadam)");
}

OptimizerSpec OptimizerSpec::defaults(OptimizerKind kind) {
  OptimizerSpec spec;
  spec.kind = kind;
  switch (kind) {
    case OptimizerKind::sgd: spec.learning_rate = 1e-2; break;
    case OptimizerKind::adam: break;
    case OptimizerKind::rmsprop: spec.rho = 0.9; break;
    case OptimizerKind::adagrad: spec.learning_rate = 1e-2; break;
    case OptimizerKind::adadelta:
      spec.learning_rate = 1.0;
      spec.rho = 0.95;
      spec.epsilon = 1e-6;
      break;
    case OptimizerKind::adamax:
    case OptimizerKind::nadam: spec.learning_rate = 2e-3; break;
  }
  return spec;
}

void OptimizerSpec::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("optimizer learning_rate must be > 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("optimizer betas must lie in [0, 1)");
  }
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("optimizer rho must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("optimizer epsilon must be > 0");
  if (!(clip_norm >= 0.0)) throw ConfigError("optimizer clip_norm must be >= 0");
}

OptimizerState OptimizerState::init(const OptimizerSpec& spec, Eigen::Index parameter_count) {
  spec.validate();
  OptimizerState state;
  state.kind = spec.kind;
  state.first = VectorXd::Zero(parameter_count);
  state.second = VectorXd::Zero(parameter_count);
  return state;
}

double clip_global_norm(VectorXd& grads, double max_norm) {
  const double norm = grads.norm();
  if (max_norm > 0.0 && norm > max_norm) grads *= max_norm / norm;
  return norm;
}

void optimizer_step(Eigen::Ref<VectorXd> params, const VectorXd& grads, OptimizerState& state,
                    const OptimizerSpec& spec) {
  if (grads.size() != params.size() || state.first.size() != params.size() ||
      state.second.size() != params.size()) {
    throw ShapeError("optimizer_step: params " + std::to_string(params.size()) + ", grads " +
                     std::to_string(grads.size()) + ", state " +
                     std::to_string(state.first.size()));
  }
  if (state.kind != spec.kind) {
    throw InvalidArgument(std::string("optimizer_step: state is for ") + to_string(state.kind) +
                          ", spec is " + to_string(spec.kind));
  }
  VectorXd g = grads;
  if (spec.clip_norm > 0.0) clip_global_norm(g, spec.clip_norm);

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double lr = spec.learning_rate;
  const double eps = spec.epsilon;
  auto& m = state.first;
  auto& v = state.second;

  switch (spec.kind) {
    case OptimizerKind::sgd:
      params -= lr * g;
      break;
    case OptimizerKind::adam: {
      m = spec.beta1 * m + (1.0 - spec.beta1) * g;
      v = spec.beta2 * v + (1.0 - spec.beta2) * g.cwiseAbs2();
      const double c1 = 1.0 - std::pow(spec.beta1, t);
      const double c2 = 1.0 - std::pow(spec.beta2, t);
      params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
      break;
    }
    case OptimizerKind::rmsprop:
      v = spec.rho * v + (1.0 - spec.rho) * g.cwiseAbs2();
      params.array() -= lr * g.array() / (v.array().sqrt() + eps);
      break;
    case OptimizerKind::adagrad:
      v += g.cwiseAbs2();
      params.array() -= lr * g.array() / (v.array().sqrt() + eps);
      break;
    case OptimizerKind::adadelta: {
      v = spec.rho * v + (1.0 - spec.rho) * g.cwiseAbs2();
      const VectorXd delta =
          (-((m.array() + eps).sqrt() / (v.array() + eps).sqrt()) * g.array()).matrix();
      m = spec.rho * m + (1.0 - spec.rho) * delta.cwiseAbs2();
      params += lr * delta;
      break;
    }
    case OptimizerKind::adamax: {
      m = spec.beta1 * m + (1.0 - spec.beta1) * g;
      v = (spec.beta2 * v).cwiseMax(g.cwiseAbs());
      const double c1 = 1.0 - std::pow(spec.beta1, t);
      params.array() -= (lr / c1) * m.array() / (v.array() + eps);
      break;
    }
    case OptimizerKind::nadam: {
      m = spec.beta1 * m + (1.0 - spec.beta1) * g;
      v = spec.beta2 * v + (1.0 - spec.beta2) * g.cwiseAbs2();
      const double c1_next = 1.0 - std::pow(spec.beta1, t + 1.0);
      const double c1 = 1.0 - std::pow(spec.beta1, t);
      const double c2 = 1.0 - std::pow(spec.beta2, t);
      const VectorXd m_hat = spec.beta1 * m / c1_next + (1.0 - spec.beta1) * g / c1;
      params.array() -= lr * m_hat.array() / ((v.array() / c2).sqrt() + eps);
      break;
    }
  }
}

}  // namespace deepcso
