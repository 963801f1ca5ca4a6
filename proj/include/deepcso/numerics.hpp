#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "deepcso/errors.hpp"

namespace deepcso {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

enum class Activation { sigmoid, tanh, identity, relu };

inline const char* to_string(Activation kind) {
  switch (kind) {
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
  }
  return "?";
}

namespace detail {

// Stable logistic: never evaluates exp of a large positive argument.
template <typename Scalar>
inline Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
inline Scalar activate(Scalar x, Activation kind) {
  switch (kind) {
    case Activation::sigmoid: return sigmoid(x);
    case Activation::tanh: return std::tanh(x);
    case Activation::identity: return x;
    case Activation::relu: return x > Scalar(0) ? x : Scalar(0);
  }
  return x;
}

// Derivative expressed through the activation's output y = act(x).
template <typename Scalar>
inline Scalar activate_grad_from_output(Scalar y, Activation kind) {
  switch (kind) {
    case Activation::sigmoid: return y * (Scalar(1) - y);
    case Activation::tanh: return Scalar(1) - y * y;
    case Activation::identity: return Scalar(1);
    case Activation::relu: return y > Scalar(0) ? Scalar(1) : Scalar(0);
  }
  return Scalar(1);
}

template <typename Derived>
std::string shape_of(const Eigen::EigenBase<Derived>& m) {
  std::ostringstream out;
  out << m.rows() << "x" << m.cols();
  return out.str();
}

}  // namespace detail

template <typename Scalar>
Scalar activation(Scalar x, Activation kind) {
  if (!std::isfinite(x)) {
    throw InvalidArgument("activation: non-finite input");
  }
  return detail::activate(x, kind);
}

/// Elementwise activation over a dense expression. Hot path: no finiteness check.
template <typename Derived>
auto activate(const Eigen::MatrixBase<Derived>& x, Activation kind) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([kind](Scalar v) { return detail::activate(v, kind); }).eval();
}

/// W x + b, the weighted sum feeding every unit.
template <typename Scalar>
Vector<Scalar> affine(const Matrix<Scalar>& weights, const Vector<Scalar>& x,
                      const Vector<Scalar>& bias) {
  if (weights.cols() != x.size() || weights.rows() != bias.size()) {
    throw ShapeError("affine: W is " + detail::shape_of(weights) + ", x is " +
                     detail::shape_of(x) + ", b is " + detail::shape_of(bias));
  }
  return weights * x + bias;
}

/// Deterministic generator: 64-bit Mersenne Twister (std::mt19937_64, whose
/// output sequence is fixed by the standard) with hand-written conversions to
/// floating point, so draws are identical across standard libraries.
class SeededRng {
 public:
  static constexpr const char* algorithm = "mt19937_64";

  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer on [0, n), rejection-sampled so it is unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw InvalidArgument("SeededRng::below: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t draw;
    do {
      draw = engine_();
    } while (draw >= limit);
    return draw % n;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double exponential(double mean) { return -mean * std::log1p(-uniform01()); }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer; derives independent sub-seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum class InitScheme { uniform_fanin, zeros };

/// Entries drawn row by row, i.i.d. uniform on [-1/sqrt(cols), 1/sqrt(cols)].
template <typename Scalar>
Matrix<Scalar> init_params(Eigen::Index rows, Eigen::Index cols, SeededRng& rng,
                           InitScheme scheme) {
  if (rows < 1 || cols < 1) {
    throw InvalidArgument("init_params: zero dimension " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
  Matrix<Scalar> out = Matrix<Scalar>::Zero(rows, cols);
  if (scheme == InitScheme::zeros) return out;
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      out(i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
    }
  }
  return out;
}

}  // namespace deepcso
