#pragma once

#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "deepcso/numerics.hpp"

// Forward and backward steps for the four unit types. Every step works on a
// batch: inputs are (features x batch) matrices, one sample per column, so a
// single sample is simply a one-column matrix.
//
//   ffnn:  y   = act(W x + b)
//   rnn:   h_t = tanh(W [x_t; h_{t-1}] + b)
//   lstm:  i, f, o = sigmoid(W_{i,f,o} [x_t; h_{t-1}] + b_{i,f,o})
//          cbar    = tanh(W_c [x_t; h_{t-1}] + b_c)
//          c_t     = f * c_{t-1} + i * cbar
//          h_t     = o * tanh(c_t)
//   gru:   z, r    = sigmoid(W_{z,r} [x_t; h_{t-1}] + b_{z,r})
//          htilde  = tanh(W_h [x_t; r * h_{t-1}] + b_h)
//          h_t     = z * htilde + (1 - z) * h_{t-1}
//
// Note the GRU update gate multiplies the candidate, not the previous state.
namespace deepcso {

enum class CellKind { ffnn, rnn, lstm, gru };

inline const char* to_string(CellKind kind) {
  switch (kind) {
    case CellKind::ffnn: return "ffnn";
    case CellKind::rnn: return "rnn";
    case CellKind::lstm: return "lstm";
    case CellKind::gru: return "gru";
  }
  return "?";
}

inline CellKind parse_cell_kind(const std::string& name) {
  if (name == "ffnn") return CellKind::ffnn;
  if (name == "rnn") return CellKind::rnn;
  if (name == "lstm") return CellKind::lstm;
  if (name == "gru") return CellKind::gru;
  throw InvalidArgument("unknown cell kind '" + name + "' (expected ffnn|rnn|lstm|gru)");
}

inline bool is_recurrent(CellKind kind) { return kind != CellKind::ffnn; }

inline int gate_count(CellKind kind) {
  switch (kind) {
    case CellKind::lstm: return 4;
    case CellKind::gru: return 3;
    default: return 1;
  }
}

namespace lstm_gate {
constexpr int input = 0, forget = 1, output = 2, candidate = 3;
}
namespace gru_gate {
constexpr int update = 0, reset = 1, candidate = 2;
}

inline const char* gate_name(CellKind kind, int gate) {
  static const char* lstm_names[] = {"input", "forget", "output", "candidate"};
  static const char* gru_names[] = {"update", "reset", "candidate"};
  switch (kind) {
    case CellKind::lstm: return lstm_names[gate];
    case CellKind::gru: return gru_names[gate];
    default: return "main";
  }
}

template <typename Scalar>
struct Gate {
  Matrix<Scalar> weights;
  Vector<Scalar> bias;
};

template <typename Scalar>
struct CellParams {
  CellKind kind = CellKind::rnn;
  Eigen::Index input_size = 0;
  Eigen::Index hidden_size = 0;
  std::vector<Gate<Scalar>> gates;

  // Recurrent cells see [x_t; h_{t-1}], the feed-forward layer only x.
  Eigen::Index weight_cols() const {
    return is_recurrent(kind) ? input_size + hidden_size : input_size;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& g : gates) n += g.weights.size() + g.bias.size();
    return n;
  }

  static CellParams zeros(CellKind kind, Eigen::Index input_size, Eigen::Index hidden_size) {
    CellParams p{kind, input_size, hidden_size, {}};
    check_sizes(input_size, hidden_size);
    for (int g = 0; g < gate_count(kind); ++g) {
      p.gates.push_back({Matrix<Scalar>::Zero(hidden_size, p.weight_cols()),
                         Vector<Scalar>::Zero(hidden_size)});
    }
    return p;
  }

  // Weights uniform on +-1/sqrt(fan_in); biases likewise, drawn after each weight.
  static CellParams random(CellKind kind, Eigen::Index input_size, Eigen::Index hidden_size,
                           SeededRng& rng) {
    CellParams p{kind, input_size, hidden_size, {}};
    check_sizes(input_size, hidden_size);
    const Eigen::Index fan_in = p.weight_cols();
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int g = 0; g < gate_count(kind); ++g) {
      Gate<Scalar> gate;
      gate.weights = init_params<Scalar>(hidden_size, fan_in, rng, InitScheme::uniform_fanin);
      gate.bias.resize(hidden_size);
      for (Eigen::Index i = 0; i < hidden_size; ++i) {
        gate.bias(i) = static_cast<Scalar>(rng.uniform(-bound, bound));
      }
      p.gates.push_back(std::move(gate));
    }
    return p;
  }

  void validate() const {
    if (static_cast<int>(gates.size()) != gate_count(kind)) {
      throw ShapeError(std::string(to_string(kind)) + " cell expects " +
                       std::to_string(gate_count(kind)) + " gates, has " +
                       std::to_string(gates.size()));
    }
    for (const auto& g : gates) {
      if (g.weights.rows() != hidden_size || g.weights.cols() != weight_cols() ||
          g.bias.size() != hidden_size) {
        throw ShapeError(std::string(to_string(kind)) + " gate has W " +
                         detail::shape_of(g.weights) + ", b " + detail::shape_of(g.bias) +
                         "; expected W " + std::to_string(hidden_size) + "x" +
                         std::to_string(weight_cols()));
      }
      if (!g.weights.allFinite() || !g.bias.allFinite()) {
        throw InvalidState(std::string(to_string(kind)) + " cell has non-finite parameters");
      }
    }
  }

  void set_zero() {
    for (auto& g : gates) {
      g.weights.setZero();
      g.bias.setZero();
    }
  }

 private:
  static void check_sizes(Eigen::Index input_size, Eigen::Index hidden_size) {
    if (input_size < 1 || hidden_size < 1) {
      throw InvalidArgument("cell sizes must be >= 1 (input " + std::to_string(input_size) +
                            ", hidden " + std::to_string(hidden_size) + ")");
    }
  }
};

template <typename Scalar>
struct CellState {
  Matrix<Scalar> h;
  std::optional<Matrix<Scalar>> c;  // memory cell, lstm only

  static CellState zeros(CellKind kind, Eigen::Index hidden_size, Eigen::Index batch = 1) {
    CellState s{Matrix<Scalar>::Zero(hidden_size, batch), std::nullopt};
    if (kind == CellKind::lstm) s.c = Matrix<Scalar>::Zero(hidden_size, batch);
    return s;
  }
};

// Intermediates of one training-mode forward step.
template <typename Scalar>
struct StepCache {
  CellKind kind = CellKind::rnn;
  Activation activation = Activation::tanh;  // ffnn only
  Matrix<Scalar> input;                      // x_t, or [x_t; h_{t-1}] for recurrent cells
  Matrix<Scalar> h_prev;
  Matrix<Scalar> c_prev;
  Matrix<Scalar> reset_input;                // gru: [x_t; r * h_{t-1}]
  std::vector<Matrix<Scalar>> gates;         // post-activation, in gate order
  Matrix<Scalar> c;
  Matrix<Scalar> h;
};

template <typename Scalar>
struct StepResult {
  CellState<Scalar> state;
  std::optional<StepCache<Scalar>> cache;
};

template <typename Scalar>
struct StepGradients {
  Matrix<Scalar> x;
  Matrix<Scalar> h_prev;
  std::optional<Matrix<Scalar>> c_prev;
};

namespace detail {

template <typename Scalar>
void check_step_input(const CellParams<Scalar>& params, const Matrix<Scalar>& x,
                      const std::type_identity_t<Matrix<Scalar>>* h_prev) {
  if (x.rows() != params.input_size) {
    throw ShapeError(std::string(to_string(params.kind)) + " step: input is " + shape_of(x) +
                     ", cell expects " + std::to_string(params.input_size) + " rows");
  }
  if (h_prev != nullptr &&
      (h_prev->rows() != params.hidden_size || h_prev->cols() != x.cols())) {
    throw ShapeError(std::string(to_string(params.kind)) + " step: previous state is " +
                     shape_of(*h_prev) + ", expected " + std::to_string(params.hidden_size) +
                     "x" + std::to_string(x.cols()));
  }
}

template <typename Scalar>
Matrix<Scalar> gate_preactivation(const Gate<Scalar>& gate, const Matrix<Scalar>& input) {
  Matrix<Scalar> z = gate.weights * input;
  z.colwise() += gate.bias;
  return z;
}

template <typename Scalar>
Matrix<Scalar> stack(const Matrix<Scalar>& top, const Matrix<Scalar>& bottom) {
  Matrix<Scalar> out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

// Accumulate dW += delta * input^T, db += row sums of delta.
template <typename Scalar>
void accumulate_gate(Gate<Scalar>& grad, const Matrix<Scalar>& delta,
                     const Matrix<Scalar>& input) {
  grad.weights.noalias() += delta * input.transpose();
  grad.bias += delta.rowwise().sum();
}

template <typename Scalar>
void require_kind(CellKind expected, CellKind actual, const char* what) {
  if (expected != actual) {
    throw InvalidArgument(std::string(what) + ": kind mismatch (" + to_string(expected) +
                          " vs " + to_string(actual) + ")");
  }
}

}  // namespace detail

template <typename Scalar>
StepResult<Scalar> ffnn_step(const Matrix<Scalar>& x, const CellParams<Scalar>& params,
                             Activation act, bool training) {
  detail::require_kind<Scalar>(CellKind::ffnn, params.kind, "ffnn_step");
  detail::check_step_input(params, x, nullptr);
  Matrix<Scalar> y = activate(detail::gate_preactivation(params.gates[0], x), act);
  StepResult<Scalar> out;
  if (training) {
    StepCache<Scalar> cache;
    cache.kind = CellKind::ffnn;
    cache.activation = act;
    cache.input = x;
    cache.h = y;
    out.cache = std::move(cache);
  }
  out.state.h = std::move(y);
  return out;
}

template <typename Scalar>
Matrix<Scalar> ffnn_forward(const Matrix<Scalar>& x, const CellParams<Scalar>& params,
                            Activation act) {
  return ffnn_step(x, params, act, false).state.h;
}

template <typename Scalar>
StepResult<Scalar> rnn_step(const Matrix<Scalar>& x, const Matrix<Scalar>& h_prev,
                            const CellParams<Scalar>& params, bool training) {
  detail::require_kind<Scalar>(CellKind::rnn, params.kind, "rnn_step");
  detail::check_step_input(params, x, &h_prev);
  Matrix<Scalar> input = detail::stack(x, h_prev);
  Matrix<Scalar> h = activate(detail::gate_preactivation(params.gates[0], input),
                              Activation::tanh);
  StepResult<Scalar> out;
  if (training) {
    StepCache<Scalar> cache;
    cache.kind = CellKind::rnn;
    cache.input = std::move(input);
    cache.h_prev = h_prev;
    cache.h = h;
    out.cache = std::move(cache);
  }
  out.state.h = std::move(h);
  return out;
}

template <typename Scalar>
StepResult<Scalar> lstm_step(const Matrix<Scalar>& x, const CellState<Scalar>& state,
                             const CellParams<Scalar>& params, bool training) {
  detail::require_kind<Scalar>(CellKind::lstm, params.kind, "lstm_step");
  detail::check_step_input(params, x, &state.h);
  if (!state.c || state.c->rows() != params.hidden_size || state.c->cols() != x.cols()) {
    throw ShapeError("lstm_step: memory cell missing or misshaped");
  }
  if (!state.h.allFinite() || !state.c->allFinite()) {
    throw InvalidState("lstm_step: non-finite previous state");
  }
  namespace g = lstm_gate;
  Matrix<Scalar> concat = detail::stack(x, state.h);
  std::vector<Matrix<Scalar>> gates(4);
  for (int gate : {g::input, g::forget, g::output}) {
    gates[gate] = activate(detail::gate_preactivation(params.gates[gate], concat),
                           Activation::sigmoid);
  }
  gates[g::candidate] =
      activate(detail::gate_preactivation(params.gates[g::candidate], concat), Activation::tanh);

  Matrix<Scalar> c = gates[g::forget].cwiseProduct(*state.c) +
                     gates[g::input].cwiseProduct(gates[g::candidate]);
  Matrix<Scalar> h = gates[g::output].cwiseProduct(activate(c, Activation::tanh));

  StepResult<Scalar> out;
  if (training) {
    StepCache<Scalar> cache;
    cache.kind = CellKind::lstm;
    cache.input = std::move(concat);
    cache.h_prev = state.h;
    cache.c_prev = *state.c;
    cache.gates = std::move(gates);
    cache.c = c;
    cache.h = h;
    out.cache = std::move(cache);
  }
  out.state.h = std::move(h);
  out.state.c = std::move(c);
  return out;
}

template <typename Scalar>
StepResult<Scalar> gru_step(const Matrix<Scalar>& x, const Matrix<Scalar>& h_prev,
                            const CellParams<Scalar>& params, bool training) {
  detail::require_kind<Scalar>(CellKind::gru, params.kind, "gru_step");
  detail::check_step_input(params, x, &h_prev);
  namespace g = gru_gate;
  Matrix<Scalar> concat = detail::stack(x, h_prev);
  Matrix<Scalar> z =
      activate(detail::gate_preactivation(params.gates[g::update], concat), Activation::sigmoid);
  Matrix<Scalar> r =
      activate(detail::gate_preactivation(params.gates[g::reset], concat), Activation::sigmoid);
  Matrix<Scalar> reset_input = detail::stack<Scalar>(x, r.cwiseProduct(h_prev));
  Matrix<Scalar> candidate_h = activate(
      detail::gate_preactivation(params.gates[g::candidate], reset_input), Activation::tanh);
  Matrix<Scalar> h = z.cwiseProduct(candidate_h) +
                     (Matrix<Scalar>::Ones(z.rows(), z.cols()) - z).cwiseProduct(h_prev);

  StepResult<Scalar> out;
  if (training) {
    StepCache<Scalar> cache;
    cache.kind = CellKind::gru;
    cache.input = std::move(concat);
    cache.h_prev = h_prev;
    cache.reset_input = std::move(reset_input);
    cache.gates = {std::move(z), std::move(r), std::move(candidate_h)};
    cache.h = h;
    out.cache = std::move(cache);
  }
  out.state.h = std::move(h);
  return out;
}

/// Dispatch on the cell kind. The ffnn layer ignores `state` and uses tanh.
template <typename Scalar>
StepResult<Scalar> cell_step(const Matrix<Scalar>& x, const CellState<Scalar>& state,
                             const CellParams<Scalar>& params, bool training) {
  switch (params.kind) {
    case CellKind::ffnn: return ffnn_step(x, params, Activation::tanh, training);
    case CellKind::rnn: return rnn_step(x, state.h, params, training);
    case CellKind::lstm: return lstm_step(x, state, params, training);
    case CellKind::gru: return gru_step(x, state.h, params, training);
  }
  throw InvalidArgument("cell_step: unknown kind");
}

/// Backward through one step. Parameter gradients are added into `grads`
/// (which must be shaped like `params`); accumulation across time steps is the
/// caller's responsibility. `grad_c` is the gradient reaching c_t (lstm only).
template <typename Scalar>
StepGradients<Scalar> cell_step_backward(const StepCache<Scalar>& cache,
                                         const Matrix<Scalar>& grad_h,
                                         const std::type_identity_t<Matrix<Scalar>>* grad_c,
                                         const CellParams<Scalar>& params,
                                         CellParams<Scalar>& grads) {
  detail::require_kind<Scalar>(params.kind, cache.kind, "cell_step_backward");
  detail::require_kind<Scalar>(params.kind, grads.kind, "cell_step_backward (grads)");
  if (grad_h.rows() != params.hidden_size || grad_h.cols() != cache.h.cols()) {
    throw ShapeError("cell_step_backward: grad_h is " + detail::shape_of(grad_h) +
                     ", output is " + detail::shape_of(cache.h));
  }
  const Eigen::Index in = params.input_size;
  const Eigen::Index hid = params.hidden_size;
  StepGradients<Scalar> out;

  switch (params.kind) {
    case CellKind::ffnn: {
      Matrix<Scalar> delta = grad_h.cwiseProduct(cache.h.unaryExpr([&](Scalar y) {
        return detail::activate_grad_from_output(y, cache.activation);
      }));
      detail::accumulate_gate(grads.gates[0], delta, cache.input);
      out.x = params.gates[0].weights.transpose() * delta;
      break;
    }
    case CellKind::rnn: {
      Matrix<Scalar> delta = grad_h.cwiseProduct(
          (Matrix<Scalar>::Ones(hid, grad_h.cols()) - cache.h.cwiseProduct(cache.h)));
      detail::accumulate_gate(grads.gates[0], delta, cache.input);
      Matrix<Scalar> d_input = params.gates[0].weights.transpose() * delta;
      out.x = d_input.topRows(in);
      out.h_prev = d_input.bottomRows(hid);
      break;
    }
    case CellKind::lstm: {
      namespace g = lstm_gate;
      const auto& i = cache.gates[g::input];
      const auto& f = cache.gates[g::forget];
      const auto& o = cache.gates[g::output];
      const auto& cbar = cache.gates[g::candidate];
      const Matrix<Scalar> ones = Matrix<Scalar>::Ones(hid, grad_h.cols());
      const Matrix<Scalar> tanh_c = activate(cache.c, Activation::tanh);

      Matrix<Scalar> dc = grad_h.cwiseProduct(o).cwiseProduct(ones - tanh_c.cwiseProduct(tanh_c));
      if (grad_c != nullptr) dc += *grad_c;

      const Matrix<Scalar> d_o =
          grad_h.cwiseProduct(tanh_c).cwiseProduct(o.cwiseProduct(ones - o));
      const Matrix<Scalar> d_i = dc.cwiseProduct(cbar).cwiseProduct(i.cwiseProduct(ones - i));
      const Matrix<Scalar> d_f =
          dc.cwiseProduct(cache.c_prev).cwiseProduct(f.cwiseProduct(ones - f));
      const Matrix<Scalar> d_cbar =
          dc.cwiseProduct(i).cwiseProduct(ones - cbar.cwiseProduct(cbar));

      detail::accumulate_gate(grads.gates[g::input], d_i, cache.input);
      detail::accumulate_gate(grads.gates[g::forget], d_f, cache.input);
      detail::accumulate_gate(grads.gates[g::output], d_o, cache.input);
      detail::accumulate_gate(grads.gates[g::candidate], d_cbar, cache.input);

      Matrix<Scalar> d_input = params.gates[g::input].weights.transpose() * d_i;
      d_input.noalias() += params.gates[g::forget].weights.transpose() * d_f;
      d_input.noalias() += params.gates[g::output].weights.transpose() * d_o;
      d_input.noalias() += params.gates[g::candidate].weights.transpose() * d_cbar;
      out.x = d_input.topRows(in);
      out.h_prev = d_input.bottomRows(hid);
      out.c_prev = dc.cwiseProduct(f);
      break;
    }
    case CellKind::gru: {
      namespace g = gru_gate;
      const auto& z = cache.gates[g::update];
      const auto& r = cache.gates[g::reset];
      const auto& ht = cache.gates[g::candidate];
      const Matrix<Scalar> ones = Matrix<Scalar>::Ones(hid, grad_h.cols());

      const Matrix<Scalar> d_ht = grad_h.cwiseProduct(z).cwiseProduct(ones - ht.cwiseProduct(ht));
      detail::accumulate_gate(grads.gates[g::candidate], d_ht, cache.reset_input);
      const Matrix<Scalar> d_reset_input = params.gates[g::candidate].weights.transpose() * d_ht;
      const auto d_rh = d_reset_input.bottomRows(hid);

      const Matrix<Scalar> d_z =
          grad_h.cwiseProduct(ht - cache.h_prev).cwiseProduct(z.cwiseProduct(ones - z));
      const Matrix<Scalar> d_r =
          d_rh.cwiseProduct(cache.h_prev).cwiseProduct(r.cwiseProduct(ones - r));
      detail::accumulate_gate(grads.gates[g::update], d_z, cache.input);
      detail::accumulate_gate(grads.gates[g::reset], d_r, cache.input);

      Matrix<Scalar> d_input = params.gates[g::update].weights.transpose() * d_z;
      d_input.noalias() += params.gates[g::reset].weights.transpose() * d_r;
      out.x = d_input.topRows(in) + d_reset_input.topRows(in);
      out.h_prev = d_input.bottomRows(hid) + d_rh.cwiseProduct(r) +
                   grad_h.cwiseProduct(ones - z);
      break;
    }
  }
  return out;
}

}  // namespace deepcso
