#include "doctest.h"

#include "deepcso/optim.hpp"

using namespace deepcso;

namespace {

const OptimizerKind kAll[] = {OptimizerKind::sgd,      OptimizerKind::adam,
                              OptimizerKind::rmsprop,  OptimizerKind::adagrad,
                              OptimizerKind::adadelta, OptimizerKind::adamax,
                              OptimizerKind::nadam};

VectorXd one(double v) { return VectorXd::Constant(1, v); }

}  // namespace

TEST_CASE("sgd step") {
  auto spec = OptimizerSpec::defaults(OptimizerKind::sgd);
  spec.learning_rate = 0.1;
  auto state = OptimizerState::init(spec, 1);
  VectorXd p = one(1.0);
  optimizer_step(p, one(2.0), state, spec);
  CHECK(p(0) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(state.step == 1);
}

TEST_CASE("adam first step matches a scalar trace of the recurrences") {
  const auto spec = OptimizerSpec::defaults(OptimizerKind::adam);
  CHECK(spec.learning_rate == 1e-3);
  CHECK(spec.beta1 == 0.9);
  CHECK(spec.beta2 == 0.999);
  CHECK(spec.epsilon == 1e-8);
  auto state = OptimizerState::init(spec, 1);
  VectorXd p = one(0.0);
  optimizer_step(p, one(0.5), state, spec);
  // m = 0.05, v = 0.00025, mhat = 0.5, vhat = 0.25:
  // -0.001 * 0.5 / (0.5 + 1e-8) = -0.00099999998000000039999999920...
  CHECK(std::abs(p(0) - -0.00099999998000000039999999920) < 1e-18);
  CHECK(std::abs(state.first(0) - 0.05) < 1e-16);
  CHECK(std::abs(state.second(0) - 0.00025) < 1e-18);
}

TEST_CASE("adam second step against a hand-unrolled trace") {
  const auto spec = OptimizerSpec::defaults(OptimizerKind::adam);
  auto state = OptimizerState::init(spec, 1);
  VectorXd p = one(1.0);
  optimizer_step(p, one(0.5), state, spec);
  optimizer_step(p, one(-0.25), state, spec);
  double m = 0.0, v = 0.0, q = 1.0;
  for (int t = 1; t <= 2; ++t) {
    const double g = t == 1 ? 0.5 : -0.25;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    q -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
  }
  CHECK(std::abs(p(0) - q) < 1e-15);
}

TEST_CASE("adam first step is bounded by the learning rate and opposes the gradient") {
  const auto spec = OptimizerSpec::defaults(OptimizerKind::adam);
  SeededRng rng(1);
  for (int k = 0; k < 500; ++k) {
    double g = rng.normal() * std::pow(10.0, rng.uniform(-6, 6));
    if (g == 0.0) continue;
    auto state = OptimizerState::init(spec, 1);
    VectorXd p = one(0.0);
    optimizer_step(p, one(g), state, spec);
    CHECK(std::abs(p(0)) > 0.0);
    CHECK(std::abs(p(0)) <= spec.learning_rate);
    CHECK(p(0) * g < 0.0);
  }
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  for (auto kind : kAll) {
    CAPTURE(to_string(kind));
    const auto spec = OptimizerSpec::defaults(kind);
    auto state = OptimizerState::init(spec, 3);
    VectorXd p = (VectorXd(3) << 1, -2, 3).finished();
    const VectorXd before = p;
    for (int t = 0; t < 3; ++t) optimizer_step(p, VectorXd::Zero(3), state, spec);
    CHECK(p == before);
    if (kind == OptimizerKind::adam) {
      CHECK(state.first.isZero(0.0));
      CHECK(state.second.isZero(0.0));
    }
  }
}

TEST_CASE("sgd on a quadratic converges monotonically") {
  for (double lr : {0.05, 0.5, 0.99}) {
    auto spec = OptimizerSpec::defaults(OptimizerKind::sgd);
    spec.learning_rate = lr;
    auto state = OptimizerState::init(spec, 1);
    const double a = 2.5;
    VectorXd p = one(-4.0);
    double dist = std::abs(p(0) - a);
    for (int k = 0; k < 200; ++k) {
      optimizer_step(p, one(p(0) - a), state, spec);
      const double next = std::abs(p(0) - a);
      CHECK(next <= dist);
      dist = next;
    }
    CHECK(dist < 1e-3);
  }
}

TEST_CASE("every method decreases a convex quadratic") {
  for (auto kind : kAll) {
    CAPTURE(to_string(kind));
    const auto spec = OptimizerSpec::defaults(kind);
    auto state = OptimizerState::init(spec, 2);
    VectorXd p = (VectorXd(2) << 1.0, -1.0).finished();
    const double start = p.squaredNorm();
    for (int k = 0; k < 300; ++k) optimizer_step(p, VectorXd(2.0 * p), state, spec);
    CHECK(p.squaredNorm() < start);
  }
}

TEST_CASE("steps are deterministic") {
  for (auto kind : kAll) {
    const auto spec = OptimizerSpec::defaults(kind);
    auto s1 = OptimizerState::init(spec, 2), s2 = OptimizerState::init(spec, 2);
    VectorXd p1 = VectorXd::Ones(2), p2 = VectorXd::Ones(2);
    const VectorXd g = (VectorXd(2) << 0.3, -0.7).finished();
    for (int k = 0; k < 5; ++k) {
      optimizer_step(p1, g, s1, spec);
      optimizer_step(p2, g, s2, spec);
    }
    CHECK(p1 == p2);
  }
}

TEST_CASE("global norm clipping") {
  VectorXd g = (VectorXd(2) << 3, 4).finished();
  CHECK(clip_global_norm(g, 1.0) == 5.0);
  CHECK(std::abs(g.norm() - 1.0) < 1e-15);
  VectorXd h = (VectorXd(2) << 0.3, 0.4).finished();
  clip_global_norm(h, 1.0);
  CHECK(h == (VectorXd(2) << 0.3, 0.4).finished());

  auto spec = OptimizerSpec::defaults(OptimizerKind::sgd);
  spec.learning_rate = 1.0;
  spec.clip_norm = 0.5;
  auto state = OptimizerState::init(spec, 2);
  VectorXd p = VectorXd::Zero(2);
  optimizer_step(p, (VectorXd(2) << 3, 4).finished(), state, spec);
  CHECK(std::abs(p.norm() - 0.5) < 1e-15);
}

TEST_CASE("optimizer errors") {
  const auto adam = OptimizerSpec::defaults(OptimizerKind::adam);
  auto state = OptimizerState::init(OptimizerSpec::defaults(OptimizerKind::sgd), 1);
  VectorXd p = one(0.0);
  CHECK_THROWS_AS(optimizer_step(p, one(1.0), state, adam), InvalidArgument);
  auto s2 = OptimizerState::init(adam, 1);
  CHECK_THROWS_AS(optimizer_step(p, VectorXd::Zero(2), s2, adam), ShapeError);
  auto bad = adam;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = adam;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(parse_optimizer_kind("adadelta") == OptimizerKind::adadelta);
  CHECK_THROWS_AS(parse_optimizer_kind("lbfgs"), InvalidArgument);
}
