#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "deepcso/metrics.hpp"
#include "deepcso/model.hpp"

namespace deepcso {

/// Search axes in the order they are visited.
enum class Axis { hidden_size, batch_size, optimizer, dropout };
inline constexpr Axis kAxes[] = {Axis::hidden_size, Axis::batch_size, Axis::optimizer,
                                 Axis::dropout};
const char* to_string(Axis axis);

/// Everything one trial trains with.
struct TrialConfig {
  ModelConfig model;
  OptimizerSpec optimizer;
  Eigen::Index batch_size = 1024;
  Eigen::Index epochs = 200;
  Eigen::Index patience = 10;

  bool operator==(const TrialConfig&) const = default;
};

struct SearchSpace {
  std::vector<Eigen::Index> hidden_sizes;
  std::vector<Eigen::Index> batch_sizes;
  std::vector<OptimizerKind> optimizers;
  std::vector<double> dropouts;
  TrialConfig base;

  /// Candidate lists of the reference hyperparameter study, with `base` moved
  /// to its optimal column (hidden 512, batch 1024, adam, dropout 0.2).
  static SearchSpace table3(TrialConfig base = {});

  Eigen::Index axis_size(Axis axis) const;
  /// `config` with candidate `index` of `axis` applied.
  TrialConfig with_candidate(const TrialConfig& config, Axis axis, Eigen::Index index) const;
  std::string candidate_label(Axis axis, Eigen::Index index) const;
  void validate() const;
};

/// What an objective reports back for one trained configuration.
struct TrialOutcome {
  double val_loss = 0.0;
  std::optional<MetricsReport> test_report;
};

using Objective = std::function<TrialOutcome(const TrialConfig& config, std::uint64_t seed)>;

struct TrialResult {
  Eigen::Index pass = 1;
  Axis axis = Axis::hidden_size;
  Eigen::Index candidate = 0;
  TrialConfig config;
  std::uint64_t seed = 0;
  std::optional<double> val_loss;  // absent when the trial failed
  std::string error;
  std::optional<MetricsReport> test_report;
  double wall_seconds = 0.0;

  bool ok() const { return val_loss.has_value(); }
};

struct SearchOptions {
  // Repeat passes until no axis changes, at most `max_passes`.
  bool multi_pass = false;
  Eigen::Index max_passes = 10;
  std::function<void(const TrialResult&)> on_trial;
};

struct SearchResult {
  TrialConfig best;
  double best_loss = 0.0;
  Eigen::Index passes = 0;
  std::vector<TrialResult> trials;
};

/// Trial seed for candidate `index` of `axis`.
std::uint64_t trial_seed(std::uint64_t base_seed, Axis axis, Eigen::Index index);

/// One axis at a time with the others held at their current best. An axis's
/// winner (lowest loss, earliest on ties) is adopted only if it beats the
/// best loss seen so far, so the best loss never increases.
SearchResult coordinate_search(const SearchSpace& space, const Objective& objective,
                               const SearchOptions& options = {});

/// Trains build_model(config.model with `seed`) and reports its validation
/// loss; with `test` and `scaler` also the held-out metrics.
Objective training_objective(const WindowedDataset& train, const WindowedDataset& val,
                             const WindowedDataset* test = nullptr,
                             const ScalerParams* scaler = nullptr);

/// One structured record per trial, no timing (so logs are reproducible).
nlohmann::ordered_json to_json(const TrialResult& trial);
void append_trial_log(const TrialResult& trial, std::ostream& out);

}  // namespace deepcso
