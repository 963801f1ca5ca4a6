#include "deepcso/tuner.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <ostream>

namespace deepcso {

const char* to_string(Axis axis) {
  switch (axis) {
    case Axis::hidden_size: return "hidden_size";
    case Axis::batch_size: return "batch_size";
    case Axis::optimizer: return "optimizer";
    case Axis::dropout: return "dropout";
  }
  return "?";
}

SearchSpace SearchSpace::table3(TrialConfig base) {
  SearchSpace s;
  s.hidden_sizes = {32, 64, 128, 256, 512, 1024};
  s.batch_sizes = {128, 256, 512, 1024, 2048};
  s.optimizers = {OptimizerKind::rmsprop, OptimizerKind::adadelta, OptimizerKind::adagrad,
                  OptimizerKind::adam,    OptimizerKind::adamax,   OptimizerKind::nadam};
  s.dropouts = {0.5, 0.35, 0.2, 0.0};
  base.model.hidden_size = 512;
  base.batch_size = 1024;
  base.optimizer = OptimizerSpec::defaults(OptimizerKind::adam);
  base.model.dropout_ratio = 0.2;
  s.base = base;
  return s;
}

Eigen::Index SearchSpace::axis_size(Axis axis) const {
  switch (axis) {
    case Axis::hidden_size: return static_cast<Eigen::Index>(hidden_sizes.size());
    case Axis::batch_size: return static_cast<Eigen::Index>(batch_sizes.size());
    case Axis::optimizer: return static_cast<Eigen::Index>(optimizers.size());
    case Axis::dropout: return static_cast<Eigen::Index>(dropouts.size());
  }
  return 0;
}

TrialConfig SearchSpace::with_candidate(const TrialConfig& config, Axis axis,
                                        Eigen::Index index) const {
  if (index < 0 || index >= axis_size(axis)) {
    throw InvalidArgument(std::string("candidate index out of range on axis ") + to_string(axis));
  }
  const auto i = static_cast<std::size_t>(index);
  TrialConfig out = config;
  switch (axis) {
    case Axis::hidden_size: out.model.hidden_size = hidden_sizes[i]; break;
    case Axis::batch_size: out.batch_size = batch_sizes[i]; break;
    case Axis::optimizer: {
      // Switching method keeps the learning rate the caller configured.
      const double lr = out.optimizer.learning_rate;
      const double clip = out.optimizer.clip_norm;
      if (out.optimizer.kind != optimizers[i]) {
        out.optimizer = OptimizerSpec::defaults(optimizers[i]);
        out.optimizer.learning_rate = lr;
        out.optimizer.clip_norm = clip;
      }
      break;
    }
    case Axis::dropout: out.model.dropout_ratio = dropouts[i]; break;
  }
  return out;
}

std::string SearchSpace::candidate_label(Axis axis, Eigen::Index index) const {
  const auto i = static_cast<std::size_t>(index);
  switch (axis) {
    case Axis::hidden_size: return std::to_string(hidden_sizes.at(i));
    case Axis::batch_size: return std::to_string(batch_sizes.at(i));
    case Axis::optimizer: return to_string(optimizers.at(i));
    case Axis::dropout: return format_double(dropouts.at(i));
  }
  return "?";
}

void SearchSpace::validate() const {
  for (Axis axis : kAxes) {
    if (axis_size(axis) == 0) {
      throw ConfigError(std::string("search space: axis ") + to_string(axis) + " is empty");
    }
  }
  auto member = [](const auto& list, const auto& value) {
    return std::find(list.begin(), list.end(), value) != list.end();
  };
  if (!member(hidden_sizes, base.model.hidden_size)) {
    throw ConfigError("search space: base hidden_size is not a candidate");
  }
  if (!member(batch_sizes, base.batch_size)) {
    throw ConfigError("search space: base batch_size is not a candidate");
  }
  if (!member(optimizers, base.optimizer.kind)) {
    throw ConfigError("search space: base optimizer is not a candidate");
  }
  if (!member(dropouts, base.model.dropout_ratio)) {
    throw ConfigError("search space: base dropout is not a candidate");
  }
  for (auto h : hidden_sizes) {
    if (h < 1) throw ConfigError("search space: hidden sizes must be >= 1");
  }
  for (auto b : batch_sizes) {
    if (b < 1) throw ConfigError("search space: batch sizes must be >= 1");
  }
  for (auto d : dropouts) {
    if (!(d >= 0.0 && d < 1.0)) throw ConfigError("search space: dropouts must lie in [0, 1)");
  }
}

std::uint64_t trial_seed(std::uint64_t base_seed, Axis axis, Eigen::Index index) {
  return mix_seed(mix_seed(base_seed, static_cast<std::uint64_t>(axis)),
                  static_cast<std::uint64_t>(index));
}

SearchResult coordinate_search(const SearchSpace& space, const Objective& objective,
                               const SearchOptions& options) {
  space.validate();
  if (options.max_passes < 1) throw ConfigError("search: max_passes must be >= 1");
  SearchResult result;
  result.best = space.base;
  double best_loss = std::numeric_limits<double>::infinity();
  const Eigen::Index passes = options.multi_pass ? options.max_passes : 1;

  for (Eigen::Index pass = 1; pass <= passes; ++pass) {
    bool changed = false;
    for (Axis axis : kAxes) {
      std::optional<Eigen::Index> axis_best;
      double axis_loss = std::numeric_limits<double>::infinity();
      std::optional<TrialConfig> axis_config;
      for (Eigen::Index k = 0; k < space.axis_size(axis); ++k) {
        TrialResult trial;
        trial.pass = pass;
        trial.axis = axis;
        trial.candidate = k;
        trial.config = space.with_candidate(result.best, axis, k);
        trial.seed = trial_seed(space.base.model.seed, axis, k);
        const auto t0 = std::chrono::steady_clock::now();
        try {
          TrialOutcome outcome = objective(trial.config, trial.seed);
          if (!std::isfinite(outcome.val_loss)) {
            trial.error = "non-finite validation loss";
          } else {
            trial.val_loss = outcome.val_loss;
            trial.test_report = std::move(outcome.test_report);
          }
        } catch (const std::exception& e) {
          trial.error = e.what();
        }
        trial.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (trial.ok() && *trial.val_loss < axis_loss) {
          axis_loss = *trial.val_loss;
          axis_best = k;
          axis_config = trial.config;
        }
        if (options.on_trial) options.on_trial(trial);
        result.trials.push_back(std::move(trial));
      }
      if (axis_best && axis_loss < best_loss) {
        best_loss = axis_loss;
        if (!(*axis_config == result.best)) {
          result.best = *axis_config;
          changed = true;
        }
      }
    }
    result.passes = pass;
    if (!changed) break;
  }
  if (std::none_of(result.trials.begin(), result.trials.end(),
                   [](const TrialResult& t) { return t.ok(); })) {
    throw SearchError("search: all " + std::to_string(result.trials.size()) + " trials failed");
  }
  result.best_loss = best_loss;
  return result;
}

Objective training_objective(const WindowedDataset& train, const WindowedDataset& val,
                             const WindowedDataset* test, const ScalerParams* scaler) {
  if (train.empty() || val.empty()) throw EmptyDatasetError("search: empty train or val set");
  return [&train, &val, test, scaler](const TrialConfig& config, std::uint64_t seed) {
    ModelConfig mc = config.model;
    mc.seed = seed;
    Model model = build_model(mc);
    FitOptions fo;
    fo.optimizer = config.optimizer;
    fo.epochs = config.epochs;
    fo.batch_size = config.batch_size;
    fo.patience = config.patience;
    SeededRng rng(mix_seed(seed, 1));
    const TrainReport report = fit(model, train, val, fo, rng);
    TrialOutcome out;
    out.val_loss = report.epochs_run > 0 ? report.best_val_loss() : report.initial_val_loss;
    if (test != nullptr && scaler != nullptr) out.test_report = evaluate(model, *test, *scaler, to_string(mc.cell_kind));
    return out;
  };
}

namespace {

nlohmann::ordered_json config_json(const TrialConfig& c) {
  nlohmann::ordered_json j;
  j["cell"] = to_string(c.model.cell_kind);
  j["hidden"] = c.model.hidden_size;
  j["layers"] = c.model.num_recurrent_layers;
  j["lookback"] = c.model.lookback;
  j["horizon"] = c.model.horizon;
  j["dropout"] = c.model.dropout_ratio;
  j["batch_size"] = c.batch_size;
  j["optimizer"] = to_string(c.optimizer.kind);
  j["learning_rate"] = c.optimizer.learning_rate;
  j["epochs"] = c.epochs;
  j["patience"] = c.patience;
  return j;
}

}  // namespace

nlohmann::ordered_json to_json(const TrialResult& trial) {
  nlohmann::ordered_json j;
  j["pass"] = trial.pass;
  j["axis"] = to_string(trial.axis);
  j["candidate"] = trial.candidate;
  j["seed"] = trial.seed;
  j["config"] = config_json(trial.config);
  j["status"] = trial.ok() ? "ok" : "error";
  if (trial.ok()) {
    j["val_loss"] = *trial.val_loss;
  } else {
    j["error"] = trial.error;
  }
  if (trial.test_report) j["test"] = to_json(*trial.test_report);
  return j;
}

void append_trial_log(const TrialResult& trial, std::ostream& out) {
  out << to_json(trial).dump() << '\n';
  out.flush();
  if (!out) throw IoError("search: cannot write trial log");
}

}  // namespace deepcso
