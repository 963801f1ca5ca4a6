#include "doctest.h"

#include "deepcso/metrics.hpp"
#include "deepcso/model.hpp"

using namespace deepcso;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

VectorXd random_vec(Eigen::Index n, SeededRng& rng) {
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

WindowedDataset two_station_set(const MatrixXd& targets) {
  WindowedDataset d;
  d.input_channels = {"cso_1", "cso_2"};
  d.target_channels = {"cso_1", "cso_2"};
  d.lookback = 1;
  d.horizon = 3;
  d.targets = targets;
  for (Eigen::Index k = 0; k < targets.cols(); ++k) {
    d.inputs.push_back(targets.col(k).transpose());
    d.source_index.push_back(k);
  }
  return d;
}

ScalerParams two_station_scaler() {
  return {{{"cso_1", ChannelKind::level, 0.0, 2.0}, {"cso_2", ChannelKind::level, 0.5, 3.5}}};
}

}  // namespace

TEST_CASE("cc examples") {
  const VectorXd a = vec({1, 2, 3});
  CHECK(cc(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cc(a, vec({3, 2, 1})) == doctest::Approx(-1.0).epsilon(1e-15));
  // Two-pass Pearson by hand: deviations (-1.5,-0.5,0.5,1.5) and (-1.5,-0.5,1.5,0.5),
  // cross sum 4, squared sums 5 and 5, so r = 4/5.
  CHECK(std::abs(cc(vec({1, 2, 3, 4}), vec({1, 2, 4, 3})) - 0.8) < 1e-15);
  CHECK_THROWS_AS(cc(vec({1, 1, 1}), a), DegenerateError);
  CHECK_THROWS_AS(cc(a, vec({2, 2, 2})), DegenerateError);
  CHECK_THROWS_AS(cc(a, vec({1, 2})), ShapeError);
}

TEST_CASE("rmse examples") {
  CHECK(rmse(vec({1, 2, 3}), vec({1, 2, 3})) == 0.0);
  // sqrt(1/3) = 0.5773502691896257645091...
  CHECK(std::abs(rmse(vec({1, 2, 3}), vec({1, 2, 4})) - 0.57735026918962576451) < 1e-15);
  CHECK(rmse(vec({11, 12, 13}), vec({11, 12, 14})) ==
        doctest::Approx(rmse(vec({1, 2, 3}), vec({1, 2, 4}))).epsilon(1e-14));
  CHECK_THROWS_AS(rmse(vec({1}), vec({1, 2})), ShapeError);
}

TEST_CASE("nse examples") {
  const VectorXd obs = vec({1, 2, 3});
  CHECK(nse(obs, obs) == 1.0);
  CHECK(nse(obs, VectorXd::Constant(3, 2.0)) == 0.0);
  CHECK(nse(obs, vec({1, 2, 4})) == 0.5);
  CHECK_THROWS_AS(nse(vec({4, 4, 4}), obs), DegenerateError);
}

TEST_CASE("metric properties") {
  SeededRng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const VectorXd a = random_vec(50, rng), b = random_vec(50, rng), c = random_vec(50, rng);
    const double alpha = rng.uniform(0.1, 5.0), beta = rng.uniform(-3, 3);
    CHECK(std::abs(cc(a, b) - cc(b, a)) < 1e-10);
    CHECK(std::abs(cc(a, VectorXd((alpha * b).array() + beta)) - cc(a, b)) < 1e-10);
    CHECK(std::abs(cc(a, VectorXd((-alpha * b).array() + beta)) + cc(a, b)) < 1e-10);
    CHECK(std::abs(cc(a, b)) <= 1.0);

    CHECK(nse(a, b) <= 1.0);
    const double s = trial % 2 == 0 ? alpha : -alpha;
    CHECK(std::abs(nse(VectorXd((s * a).array() + beta), VectorXd((s * b).array() + beta)) -
                   nse(a, b)) < 1e-10);

    CHECK(rmse(a, b) == rmse(b, a));
    CHECK(rmse(a, b) >= 0.0);
    CHECK(rmse(a, c) <= rmse(a, b) + rmse(b, c) + 1e-10);
  }
}

TEST_CASE("scaled versus physical units") {
  SeededRng rng(22);
  const double lo = 0.3, hi = 2.1;
  const ChannelScale ch{"cso_1", ChannelKind::level, lo, hi};
  for (int trial = 0; trial < 50; ++trial) {
    const VectorXd obs = random_vec(40, rng), sim = random_vec(40, rng);
    const VectorXd uo = unscale(obs, ch), us = unscale(sim, ch);
    CHECK(std::abs(cc(uo, us) - cc(obs, sim)) < 1e-9);
    CHECK(std::abs(nse(uo, us) - nse(obs, sim)) < 1e-9);
    CHECK(std::abs(rmse(uo, us) - (hi - lo) * rmse(obs, sim)) < 1e-9);
  }
}

TEST_CASE("evaluate_predictions") {
  SeededRng rng(23);
  MatrixXd targets(2, 30);
  for (Eigen::Index i = 0; i < targets.size(); ++i) targets(i) = rng.uniform01();
  const auto data = two_station_set(targets);
  const auto scaler = two_station_scaler();

  const MetricsReport perfect = evaluate_predictions(targets, data, scaler, "gru");
  CHECK(perfect.model == "gru");
  CHECK(perfect.horizon == 3);
  CHECK(perfect.n == 30);
  for (const auto& s : perfect.stations) {
    CHECK(*s.nse == 1.0);
    CHECK(*s.rmse == 0.0);
    CHECK(*s.cc == doctest::Approx(1.0).epsilon(1e-14));
  }

  MatrixXd mean = targets;
  for (Eigen::Index r = 0; r < 2; ++r) mean.row(r).setConstant(targets.row(r).mean());
  const MetricsReport flat = evaluate_predictions(mean, data, scaler, "mean");
  for (const auto& s : flat.stations) {
    CHECK(std::abs(*s.nse) < 1e-9);
    CHECK_FALSE(s.cc.has_value());
    CHECK_FALSE(s.ok());
  }

  MatrixXd half = targets;
  half.row(1).setConstant(0.4);
  MatrixXd degenerate_targets = targets;
  degenerate_targets.row(1).setConstant(0.4);
  const auto d2 = two_station_set(degenerate_targets);
  const MetricsReport mixed = evaluate_predictions(half, d2, scaler, "x");
  CHECK(mixed.at("cso_1").ok());
  CHECK(*mixed.at("cso_1").nse == 1.0);
  CHECK_FALSE(mixed.at("cso_2").ok());
  CHECK_FALSE(mixed.at("cso_2").error.empty());
  CHECK_FALSE(mixed.at("cso_2").nse.has_value());
  CHECK(mixed.mean_nse() == 1.0);

  // rmse in physical units: scaled error 0.1 on cso_2 times the (3.5 - 0.5) range.
  MatrixXd off = targets;
  off.row(1).array() += 0.1;
  CHECK(std::abs(*evaluate_predictions(off, data, scaler, "x").at("cso_2").rmse - 0.3) < 1e-12);

  CHECK_THROWS_AS(evaluate_predictions(MatrixXd::Zero(2, 3), data, scaler, "x"), ShapeError);
}

TEST_CASE("evaluate checks the horizon") {
  ModelConfig c;
  c.hidden_size = 2;
  c.num_stations = 2;
  c.input_channels = 2;
  c.lookback = 1;
  c.horizon = 1;
  const Model m = build_model(c);
  MatrixXd targets = MatrixXd::Random(2, 5).cwiseAbs();
  CHECK_THROWS_AS(evaluate(m, two_station_set(targets), two_station_scaler(), "gru"), ConfigError);
}

TEST_CASE("report json round trip") {
  MatrixXd targets(2, 20);
  SeededRng rng(24);
  for (Eigen::Index i = 0; i < targets.size(); ++i) targets(i) = rng.uniform01();
  MatrixXd pred = targets;
  pred.row(0).array() += 0.05;
  pred.row(1).setConstant(0.5);
  const auto r = evaluate_predictions(pred, two_station_set(targets), two_station_scaler(), "lstm");
  const auto doc = to_json(r);
  CHECK(doc["cso_1"]["model"] == "lstm");
  CHECK(doc["cso_1"]["horizon"] == 3);
  CHECK(doc["cso_1"]["n"] == 20);
  CHECK(doc["cso_2"]["cc"].is_null());

  const auto back = report_from_json(nlohmann::ordered_json::parse(doc.dump()));
  CHECK(back.model == "lstm");
  CHECK(back.n == 20);
  CHECK(*back.at("cso_1").rmse == *r.at("cso_1").rmse);
  CHECK(*back.at("cso_1").cc == *r.at("cso_1").cc);
  CHECK(back.at("cso_2").error == r.at("cso_2").error);

  CHECK_THROWS_AS(report_from_json(nlohmann::ordered_json::object()), SchemaError);
  auto broken = doc;
  broken["cso_1"].erase("rmse");
  CHECK_THROWS_AS(report_from_json(broken), SchemaError);
}
