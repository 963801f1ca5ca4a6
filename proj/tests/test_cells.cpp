#include "doctest.h"

#include <cstring>

#include "deepcso/cells.hpp"
#include "gradcheck.hpp"

using namespace deepcso;

namespace {

MatrixXd m1(double v) { return MatrixXd::Constant(1, 1, v); }

VectorXd flatten(const CellParams<double>& p) {
  VectorXd out(p.parameter_count());
  Eigen::Index k = 0;
  for (const auto& g : p.gates) {
    out.segment(k, g.weights.size()) = g.weights.reshaped();
    k += g.weights.size();
    out.segment(k, g.bias.size()) = g.bias;
    k += g.bias.size();
  }
  return out;
}

void unflatten(const VectorXd& flat, CellParams<double>& p) {
  Eigen::Index k = 0;
  for (auto& g : p.gates) {
    g.weights.reshaped() = flat.segment(k, g.weights.size());
    k += g.weights.size();
    g.bias = flat.segment(k, g.bias.size());
    k += g.bias.size();
  }
}

MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, SeededRng& rng) {
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.uniform(-1.0, 1.0);
  return m;
}

// Scalar objective sum(gh .* h) + sum(gc .* c) over one step, with its
// analytic gradients from cell_step_backward.
struct StepProbe {
  CellParams<double> params;
  MatrixXd x, h_prev, c_prev, gh, gc;

  CellState<double> state() const {
    CellState<double> s{h_prev, std::nullopt};
    if (params.kind == CellKind::lstm) s.c = c_prev;
    return s;
  }

  double objective() const {
    const auto r = cell_step(x, state(), params, false);
    double v = r.state.h.cwiseProduct(gh).sum();
    if (r.state.c) v += r.state.c->cwiseProduct(gc).sum();
    return v;
  }

  std::pair<CellParams<double>, StepGradients<double>> analytic() const {
    const auto r = cell_step(x, state(), params, true);
    auto grads = CellParams<double>::zeros(params.kind, params.input_size, params.hidden_size);
    const MatrixXd* grad_c = params.kind == CellKind::lstm ? &gc : nullptr;
    auto g = cell_step_backward(*r.cache, gh, grad_c, params, grads);
    return {grads, g};
  }
};

StepProbe make_probe(CellKind kind, Eigen::Index in, Eigen::Index hid, Eigen::Index batch,
                     std::uint64_t seed) {
  SeededRng rng(seed);
  StepProbe p{CellParams<double>::random(kind, in, hid, rng), random_matrix(in, batch, rng),
              random_matrix(hid, batch, rng), random_matrix(hid, batch, rng),
              random_matrix(hid, batch, rng), random_matrix(hid, batch, rng)};
  if (kind == CellKind::ffnn) p.h_prev = MatrixXd::Zero(hid, batch);
  return p;
}

}  // namespace

TEST_CASE("ffnn examples") {
  const VectorXd x = (VectorXd(2) << 0.5, 0.5).finished();
  auto p = CellParams<double>::zeros(CellKind::ffnn, 2, 3);
  CHECK(ffnn_forward<double>(x, p, Activation::sigmoid).isApproxToConstant(0.5, 0.0));

  auto id = CellParams<double>::zeros(CellKind::ffnn, 2, 2);
  id.gates[0].weights.setIdentity();
  CHECK(ffnn_forward<double>(x, id, Activation::identity) == MatrixXd(x));

  auto one = CellParams<double>::zeros(CellKind::ffnn, 2, 1);
  one.gates[0].weights << 1, 1;
  one.gates[0].bias << -1;
  CHECK(ffnn_forward<double>(x, one, Activation::sigmoid)(0, 0) == 0.5);

  CHECK_THROWS_AS(ffnn_forward<double>(VectorXd::Zero(3), one, Activation::sigmoid), ShapeError);
}

TEST_CASE("rnn examples") {
  auto p = CellParams<double>::zeros(CellKind::rnn, 2, 3);
  CHECK(rnn_step<double>(MatrixXd::Ones(2, 1), MatrixXd::Ones(3, 1), p, false)
            .state.h.isZero(0.0));

  p.gates[0].bias.setConstant(0.7);
  CHECK(rnn_step<double>(MatrixXd::Ones(2, 1), MatrixXd::Zero(3, 1), p, false)
            .state.h.isApproxToConstant(std::tanh(0.7), 1e-15));

  auto q = CellParams<double>::zeros(CellKind::rnn, 1, 1);
  q.gates[0].weights << 1.0, 0.5;
  const auto r = rnn_step<double>(m1(0.2), m1(0.4), q, true);
  // tanh(0.4) = 0.3799489622552248852677...
  CHECK(std::abs(r.state.h(0, 0) - 0.37994896225522488527) < 1e-15);
  CHECK(r.cache.has_value());
  CHECK_FALSE(rnn_step<double>(m1(0.2), m1(0.4), q, false).cache.has_value());
  CHECK_THROWS_AS(rnn_step<double>(m1(0.2), MatrixXd::Zero(2, 1), q, false), ShapeError);
}

TEST_CASE("lstm examples") {
  auto zero = CellParams<double>::zeros(CellKind::lstm, 1, 1);
  CellState<double> s{m1(0.0), m1(1.0)};
  const auto a = lstm_step<double>(m1(3.0), s, zero, false);
  CHECK(a.state.c->value() == 0.5);
  // 0.5 tanh(0.5) = 0.2310585786300048792511...
  CHECK(std::abs(a.state.h(0, 0) - 0.23105857863000487925) < 1e-15);

  auto p = CellParams<double>::zeros(CellKind::lstm, 1, 1);
  for (auto& g : p.gates) g.weights << 1.0, 0.0;
  const auto b = lstm_step<double>(m1(1.0), CellState<double>{m1(0.0), m1(0.0)}, p, true);
  const auto& gates = b.cache->gates;
  // sigmoid(1) = 0.7310585786300048792511..., tanh(1) = 0.7615941559557648881194...
  CHECK(std::abs(gates[lstm_gate::input](0, 0) - 0.73105857863000487925) < 1e-15);
  CHECK(std::abs(gates[lstm_gate::candidate](0, 0) - 0.76159415595576488812) < 1e-15);
  // Chained with 40-digit arithmetic: c = 0.55676994114593974427...,
  // h = sigmoid(1) tanh(c) = 0.36960635293570577314...
  CHECK(std::abs(b.state.c->value() - 0.55676994114593974427) < 1e-15);
  CHECK(std::abs(b.state.h(0, 0) - 0.36960635293570577314) < 1e-15);

  CHECK_THROWS_AS(lstm_step<double>(m1(1.0), CellState<double>{m1(0.0), std::nullopt}, p, false),
                  ShapeError);
  CHECK_THROWS_AS(
      lstm_step<double>(m1(1.0), CellState<double>{m1(0.0), m1(std::nan(""))}, p, false),
      InvalidState);
}

TEST_CASE("lstm memory persists with the forget gate open and the input gate shut") {
  SeededRng rng(4);
  auto p = CellParams<double>::random(CellKind::lstm, 2, 3, rng);
  // sigmoid(40) rounds to 1 and sigmoid(-800) underflows to 0 in double.
  p.gates[lstm_gate::forget].weights.setZero();
  p.gates[lstm_gate::forget].bias.setConstant(40.0);
  p.gates[lstm_gate::input].weights.setZero();
  p.gates[lstm_gate::input].bias.setConstant(-800.0);
  const MatrixXd c0 = (MatrixXd(3, 1) << 0.25, -1.5, 3.0).finished();
  CellState<double> s{MatrixXd::Zero(3, 1), c0};
  for (int t = 0; t < 100; ++t) {
    s = lstm_step<double>(random_matrix(2, 1, rng), s, p, false).state;
    REQUIRE(std::memcmp(s.c->data(), c0.data(), sizeof(double) * 3) == 0);
  }
}

TEST_CASE("gru examples") {
  auto zero = CellParams<double>::zeros(CellKind::gru, 1, 1);
  const auto a = gru_step<double>(m1(5.0), m1(0.8), zero, true);
  CHECK(a.cache->gates[gru_gate::update](0, 0) == 0.5);
  CHECK(a.cache->gates[gru_gate::reset](0, 0) == 0.5);
  CHECK(a.state.h(0, 0) == 0.4);

  auto shut = CellParams<double>::zeros(CellKind::gru, 1, 1);
  shut.gates[gru_gate::update].bias << -800.0;
  shut.gates[gru_gate::candidate].bias << 0.9;
  CHECK(gru_step<double>(m1(2.0), m1(0.6), shut, false).state.h(0, 0) == 0.6);

  auto p = CellParams<double>::zeros(CellKind::gru, 1, 1);
  p.gates[gru_gate::candidate].weights << 0.0, 1.0;
  for (double x : {-2.0, 0.0, 7.5}) {
    const auto r = gru_step<double>(m1(x), m1(0.6), p, true);
    // tanh(0.3) = 0.29131261245159090582..., h = 0.44565630622579545291...
    CHECK(std::abs(r.cache->gates[gru_gate::candidate](0, 0) - 0.29131261245159090582) < 1e-15);
    CHECK(std::abs(r.state.h(0, 0) - 0.44565630622579545291) < 1e-15);
  }
}

TEST_CASE("gate activations lie strictly inside (0, 1) and gru output is a convex mix") {
  for (CellKind kind : {CellKind::lstm, CellKind::gru}) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      auto probe = make_probe(kind, 3, 4, 5, seed);
      const auto r = cell_step(probe.x, probe.state(), probe.params, true);
      const auto& gates = r.cache->gates;
      const int sigmoid_gates = kind == CellKind::lstm ? 3 : 2;
      for (int g = 0; g < sigmoid_gates; ++g) {
        CHECK(gates[static_cast<std::size_t>(g)].minCoeff() > 0.0);
        CHECK(gates[static_cast<std::size_t>(g)].maxCoeff() < 1.0);
      }
      if (kind == CellKind::gru) {
        const MatrixXd& ht = gates[gru_gate::candidate];
        const MatrixXd lo = ht.cwiseMin(probe.h_prev);
        const MatrixXd hi = ht.cwiseMax(probe.h_prev);
        CHECK(((r.state.h - lo).array() >= -1e-15).all());
        CHECK(((hi - r.state.h).array() >= -1e-15).all());
      }
    }
  }
}

TEST_CASE("forward steps are bitwise deterministic") {
  for (CellKind kind : {CellKind::ffnn, CellKind::rnn, CellKind::lstm, CellKind::gru}) {
    const auto probe = make_probe(kind, 3, 4, 2, 9);
    const auto a = cell_step(probe.x, probe.state(), probe.params, false);
    const auto b = cell_step(probe.x, probe.state(), probe.params, true);
    CHECK(std::memcmp(a.state.h.data(), b.state.h.data(), sizeof(double) * 8) == 0);
  }
}

TEST_CASE("backward with zero upstream gradient is zero") {
  for (CellKind kind : {CellKind::ffnn, CellKind::rnn, CellKind::lstm, CellKind::gru}) {
    auto probe = make_probe(kind, 2, 3, 2, 5);
    probe.gh.setZero();
    probe.gc.setZero();
    const auto [grads, g] = probe.analytic();
    CHECK(flatten(grads).isZero(0.0));
    CHECK(g.x.isZero(0.0));
    if (kind != CellKind::ffnn) CHECK(g.h_prev.isZero(0.0));
    if (kind == CellKind::lstm) CHECK(g.c_prev->isZero(0.0));
  }
}

TEST_CASE("one-dimensional rnn gradient matches central differences") {
  auto probe = make_probe(CellKind::rnn, 1, 1, 1, 17);
  probe.gh.setOnes();
  const auto [grads, g] = probe.analytic();
  VectorXd theta = flatten(probe.params);
  const VectorXd analytic = flatten(grads);
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double saved = theta(i);
    theta(i) = saved + 1e-6;
    unflatten(theta, probe.params);
    const double up = probe.objective();
    theta(i) = saved - 1e-6;
    unflatten(theta, probe.params);
    const double down = probe.objective();
    theta(i) = saved;
    unflatten(theta, probe.params);
    CHECK(std::abs((up - down) / 2e-6 - analytic(i)) < 1e-6);
  }
}

TEST_CASE("three-dimensional lstm gradient, seed 42") {
  auto probe = make_probe(CellKind::lstm, 3, 3, 1, 42);
  const auto [grads, g] = probe.analytic();
  VectorXd theta = flatten(probe.params);
  const auto check = testing::central_difference(theta, flatten(grads), [&] {
    unflatten(theta, probe.params);
    return probe.objective();
  });
  CHECK(check.checked == 4 * (3 * 6 + 3));
  CHECK(check.max_rel < 1e-4);
}

TEST_CASE("cell gradients match central differences for every kind") {
  for (CellKind kind : {CellKind::ffnn, CellKind::rnn, CellKind::lstm, CellKind::gru}) {
    for (Eigen::Index in = 1; in <= 4; in += 3) {
      for (Eigen::Index hid = 1; hid <= 4; ++hid) {
        CAPTURE(to_string(kind));
        CAPTURE(in);
        CAPTURE(hid);
        auto probe = make_probe(kind, in, hid, 3, 100 + static_cast<std::uint64_t>(in * 10 + hid));
        const auto [grads, g] = probe.analytic();

        VectorXd theta = flatten(probe.params);
        CHECK(testing::central_difference(theta, flatten(grads), [&] {
                unflatten(theta, probe.params);
                return probe.objective();
              }).ok());
        unflatten(theta, probe.params);

        Eigen::Map<VectorXd> x(probe.x.data(), probe.x.size());
        const VectorXd gx = g.x.reshaped();
        CHECK(testing::central_difference(x, gx, [&] { return probe.objective(); }).ok());

        if (kind != CellKind::ffnn) {
          Eigen::Map<VectorXd> h(probe.h_prev.data(), probe.h_prev.size());
          const VectorXd gh = g.h_prev.reshaped();
          CHECK(testing::central_difference(h, gh, [&] { return probe.objective(); }).ok());
        }
        if (kind == CellKind::lstm) {
          Eigen::Map<VectorXd> c(probe.c_prev.data(), probe.c_prev.size());
          const VectorXd gc = g.c_prev->reshaped();
          CHECK(testing::central_difference(c, gc, [&] { return probe.objective(); }).ok());
        }
      }
    }
  }
}

TEST_CASE("backward rejects a cache from another kind") {
  auto rnn = make_probe(CellKind::rnn, 2, 2, 1, 3);
  auto gru = make_probe(CellKind::gru, 2, 2, 1, 3);
  const auto r = cell_step(rnn.x, rnn.state(), rnn.params, true);
  auto grads = CellParams<double>::zeros(CellKind::gru, 2, 2);
  CHECK_THROWS_AS(cell_step_backward(*r.cache, rnn.gh, nullptr, gru.params, grads),
                  InvalidArgument);
}

TEST_CASE("params validation") {
  auto p = CellParams<double>::zeros(CellKind::gru, 2, 3);
  CHECK(p.parameter_count() == 3 * (3 * 5 + 3));
  p.validate();
  p.gates[1].weights.resize(3, 4);
  CHECK_THROWS_AS(p.validate(), ShapeError);
  auto q = CellParams<double>::zeros(CellKind::rnn, 2, 3);
  q.gates[0].bias(1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(q.validate(), InvalidState);
  CHECK_THROWS_AS((CellParams<double>::zeros(CellKind::lstm, 0, 3)), InvalidArgument);
  CHECK(parse_cell_kind("lstm") == CellKind::lstm);
  CHECK_THROWS_AS(parse_cell_kind("transformer"), InvalidArgument);
}
