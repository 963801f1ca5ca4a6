#include "deepcso/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "deepcso/checkpoint.hpp"
#include "deepcso/metrics.hpp"
#include "deepcso/pipeline.hpp"
#include "deepcso/synth.hpp"
#include "deepcso/tuner.hpp"

namespace deepcso {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string data;
  std::string out;
  std::string checkpoint;
  std::string at;
  std::string forecast_csv;
  std::string trial_log;
  std::string subset = "test";
  std::uint64_t seed = 1;
  std::vector<Eigen::Index> horizons{1};

  std::string cell = "gru";
  Eigen::Index hidden = 512;
  Eigen::Index layers = 2;
  double dropout = 0.2;
  Eigen::Index lookback = 0;  // 0: chosen by lag selection

  std::string optimizer = "adam";
  double learning_rate = 0.0;  // 0: the optimizer's default
  double clip_norm = 0.0;
  Eigen::Index epochs = 200;
  Eigen::Index batch_size = 1024;
  Eigen::Index patience = 10;

  double train_fraction = 0.8;
  double val_fraction = 0.1;
  Eigen::Index max_gap = 3;
  double acf_threshold = LagPolicy{}.acf_threshold;
  Eigen::Index lookback_cap = LagPolicy{}.lookback_cap;
  Eigen::Index top_m = LagPolicy{}.top_m;
  double significance_z = LagPolicy{}.significance_z;

  std::string baseline = "none";
  Eigen::Index baseline_lags = 6;
  double ridge = 1e-6;

  Eigen::Index steps = CatchmentConfig{}.steps;
  double storm_rate = CatchmentConfig::defaults().storm_rate;
  double storm_duration = CatchmentConfig::defaults().storm_mean_duration;
  double storm_intensity = CatchmentConfig::defaults().storm_mean_intensity;
  double noise = CatchmentConfig::defaults().noise_scale;

  std::vector<Eigen::Index> search_hidden;
  std::vector<Eigen::Index> search_batch;
  std::vector<std::string> search_optimizers;
  std::vector<double> search_dropouts;
  bool multi_pass = false;

  bool seed_given = false;
};

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required option ") + flag);
}

PipelineOptions pipeline_options(const RunConfig& cfg) {
  PipelineOptions po;
  po.train_fraction = cfg.train_fraction;
  po.val_fraction = cfg.val_fraction;
  po.max_gap = cfg.max_gap;
  po.lag_policy.acf_threshold = cfg.acf_threshold;
  po.lag_policy.lookback_cap = cfg.lookback_cap;
  po.lag_policy.top_m = cfg.top_m;
  po.lag_policy.significance_z = cfg.significance_z;
  if (cfg.lookback > 0) po.lag_policy.fixed_lookback = cfg.lookback;
  return po;
}

OptimizerSpec optimizer_spec(const RunConfig& cfg) {
  OptimizerSpec spec = OptimizerSpec::defaults(parse_optimizer_kind(cfg.optimizer));
  if (cfg.learning_rate > 0.0) spec.learning_rate = cfg.learning_rate;
  spec.clip_norm = cfg.clip_norm;
  spec.validate();
  return spec;
}

ModelConfig model_config(const RunConfig& cfg, const PreparedFrame& frame, Eigen::Index horizon) {
  ModelConfig mc;
  mc.cell_kind = parse_cell_kind(cfg.cell);
  mc.hidden_size = cfg.hidden;
  mc.num_recurrent_layers = cfg.layers;
  mc.num_stations = static_cast<Eigen::Index>(frame.stations.size());
  mc.lookback = frame.lags.lookback;
  mc.horizon = horizon;
  mc.dropout_ratio = cfg.dropout;
  mc.input_channels = static_cast<Eigen::Index>(frame.lags.channels.size());
  mc.seed = cfg.seed;
  mc.validate();
  return mc;
}

/// "model.json" -> "model_h3.json" when several horizons are trained.
std::string horizon_path(const std::string& path, Eigen::Index horizon, bool several) {
  if (!several) return path;
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  const std::string tag = "_h" + std::to_string(horizon);
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + tag;
  return path.substr(0, dot) + tag + path.substr(dot);
}

std::string suffixed_path(const std::string& path, const std::string& tag) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + tag;
  return path.substr(0, dot) + tag + path.substr(dot);
}

void print_report_table(const std::vector<const MetricsReport*>& reports, std::ostream& out) {
  out << pad("station", 10);
  for (const auto* r : reports) {
    for (const char* m : {"cc", "rmse", "nse"}) out << pad(r->model + "." + m, 18);
  }
  out << '\n';
  for (std::size_t s = 0; s < reports.front()->stations.size(); ++s) {
    out << pad(reports.front()->stations[s].station, 10);
    for (const auto* r : reports) {
      const auto& m = r->stations[s];
      for (const auto& v : {m.cc, m.rmse, m.nse}) out << pad(v ? fixed(*v, 4) : "n/a", 18);
    }
    out << '\n';
  }
}

// Restricts `frame` to the checkpoint's channels, in scaler order.
TimeSeriesFrame checkpoint_channels(const TimeSeriesFrame& frame, const ScalerParams& scaler) {
  std::vector<std::string> missing;
  for (const auto& c : scaler.channels) {
    if (!frame.find_channel(c.id)) missing.push_back(c.id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw SchemaError("data lacks channels required by the checkpoint: " + list);
  }
  TimeSeriesFrame out;
  out.start = frame.start;
  out.step_seconds = frame.step_seconds;
  out.values.resize(frame.length(), static_cast<Eigen::Index>(scaler.channels.size()));
  for (std::size_t j = 0; j < scaler.channels.size(); ++j) {
    const auto& c = scaler.channels[j];
    out.channels.push_back({c.id, c.kind});
    out.values.col(static_cast<Eigen::Index>(j)) = frame.values.col(frame.channel_index(c.id));
  }
  return out;
}

// ---------------------------------------------------------------- synth

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  require(cfg.out, "--out");
  CatchmentConfig cc = CatchmentConfig::defaults();
  cc.steps = cfg.steps;
  cc.storm_rate = cfg.storm_rate;
  cc.storm_mean_duration = cfg.storm_duration;
  cc.storm_mean_intensity = cfg.storm_intensity;
  cc.noise_scale = cfg.noise;
  if (cfg.seed_given) cc.seed = cfg.seed;
  const TimeSeriesFrame frame = generate(cc);
  save_csv(frame, cfg.out);

  out << "wrote " << frame.length() << " rows x " << frame.channel_count() << " channels to "
      << cfg.out << '\n';
  out << pad("channel", 10) << pad("max", 10) << pad("mean", 10) << "std\n";
  for (Eigen::Index j = 0; j < frame.channel_count(); ++j) {
    const auto col = frame.values.col(j);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() /
                                static_cast<double>(std::max<Eigen::Index>(1, col.size() - 1)));
    out << pad(frame.channels[static_cast<std::size_t>(j)].id, 10) << pad(fixed(col.maxCoeff(), 3), 10)
        << pad(fixed(mean, 3), 10) << fixed(sd, 3) << '\n';
  }
  return exit_ok;
}

// ---------------------------------------------------------------- lags

int cmd_lags(const RunConfig& cfg, std::ostream& out) {
  require(cfg.data, "--data");
  const TimeSeriesFrame raw = load_csv(cfg.data);
  const PreparedFrame frame = prepare_frame(raw, pipeline_options(cfg));
  out << "lookback " << frame.lags.lookback << '\n';
  for (const auto& c : frame.lags.channels) {
    out << pad(c.id, 10);
    for (std::size_t k = 0; k < c.lags.size(); ++k) out << (k ? " " : "") << c.lags[k];
    out << '\n';
  }
  return exit_ok;
}

// ---------------------------------------------------------------- train

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  require(cfg.data, "--data");
  require(cfg.out, "--out");
  if (cfg.horizons.empty()) throw UsageError("--horizon needs at least one value");
  const TimeSeriesFrame raw = load_csv(cfg.data);
  const PipelineOptions po = pipeline_options(cfg);
  const PreparedFrame frame = prepare_frame(raw, po);
  const OptimizerSpec opt = optimizer_spec(cfg);
  const bool several = cfg.horizons.size() > 1;

  for (Eigen::Index horizon : cfg.horizons) {
    const PreparedData data = prepare_windows(frame, horizon, po);
    Checkpoint cp{build_model(model_config(cfg, frame, horizon)), frame.scaler, frame.lags};
    FitOptions fo;
    fo.optimizer = opt;
    fo.epochs = cfg.epochs;
    fo.batch_size = cfg.batch_size;
    fo.patience = cfg.patience;
    SeededRng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(horizon)));
    const TrainReport report = fit(cp.model, data.train, data.val, fo, rng);
    const std::string path = horizon_path(cfg.out, horizon, several);
    save_checkpoint(cp, path);

    const MetricsReport test = evaluate(cp.model, data.test, frame.scaler, cfg.cell);
    out << "horizon " << horizon << ": " << report.epochs_run << " epochs ("
        << to_string(report.stop_reason) << "), train " << data.train.size() << " / val "
        << data.val.size() << " / test " << data.test.size() << " windows\n";
    const double final_val =
        report.epochs_run > 0 ? report.best_val_loss() : report.initial_val_loss;
    out << "  final validation loss " << format_double(final_val) << '\n';
    out << "  held-out mean nse " << fixed(test.mean_nse(), 4) << '\n';
    out << "  checkpoint " << path << '\n';
  }
  return exit_ok;
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  require(cfg.checkpoint, "--checkpoint");
  require(cfg.data, "--data");
  const Checkpoint cp = load_checkpoint(cfg.checkpoint);
  const TimeSeriesFrame raw = load_csv(cfg.data);
  const TimeSeriesFrame filled = fill_gaps(checkpoint_channels(raw, cp.scaler), cfg.max_gap);
  const TimeSeriesFrame scaled = scale(filled, cp.scaler);
  const Eigen::Index horizon = cp.model.config.horizon;
  const WindowedDataset all = make_windows(scaled, cp.lags, horizon, cp.stations());

  const Eigen::Index split = leading_rows(filled, cfg.train_fraction).end;
  Eigen::Index first_test = 0;
  while (first_test < all.size() &&
         all.source_index[static_cast<std::size_t>(first_test)] + horizon < split) {
    ++first_test;
  }
  WindowedDataset subset;
  if (cfg.subset == "test") {
    subset = all.slice(first_test, all.size());
  } else if (cfg.subset == "train") {
    subset = all.slice(0, first_test);
  } else if (cfg.subset == "all") {
    subset = all;
  } else {
    throw UsageError("--subset must be test, train or all");
  }
  if (subset.empty()) throw EmptyDatasetError("evaluate: the " + cfg.subset + " subset has no windows");

  const MatrixXd pred = predict(cp.model, subset);
  const MetricsReport report = evaluate_predictions(pred, subset, cp.scaler, to_string(cp.model.config.cell_kind));
  std::vector<const MetricsReport*> shown{&report};

  std::optional<MetricsReport> base;
  if (cfg.baseline != "none") {
    BaselineSpec bs;
    bs.kind = parse_baseline_kind(cfg.baseline);
    bs.lag_order = std::min(cfg.baseline_lags, cp.lags.lookback);
    bs.ridge = cfg.ridge;
    if (first_test == 0) throw EmptyDatasetError("evaluate: no training windows to fit the baseline");
    const BaselineModel bm = baseline_fit(all.slice(0, first_test), bs);
    base = evaluate_predictions(baseline_predict(bm, subset), subset, cp.scaler, cfg.baseline);
    shown.push_back(&*base);
  }

  if (cfg.out.empty()) {
    out << to_json(report).dump(2) << '\n';
  } else {
    write_file_atomic(cfg.out, to_json(report).dump(2) + "\n");
    if (base) write_file_atomic(suffixed_path(cfg.out, "_" + cfg.baseline), to_json(*base).dump(2) + "\n");
    out << "horizon " << horizon << ", " << subset.size() << " windows (" << cfg.subset << ")\n";
    print_report_table(shown, out);
  }

  if (!cfg.forecast_csv.empty()) {
    std::ostringstream csv;
    csv << "timestamp";
    for (const auto& s : subset.target_channels) csv << ',' << s << "_obs," << s << "_pred";
    csv << '\n';
    for (Eigen::Index k = 0; k < subset.size(); ++k) {
      csv << format_timestamp(filled.time_at(subset.source_index[static_cast<std::size_t>(k)] + horizon));
      for (std::size_t s = 0; s < subset.target_channels.size(); ++s) {
        const auto& c = cp.scaler.at(subset.target_channels[s]);
        const auto row = static_cast<Eigen::Index>(s);
        csv << ',' << format_double(c.unscale(subset.targets(row, k))) << ','
            << format_double(c.unscale(pred(row, k)));
      }
      csv << '\n';
    }
    write_file_atomic(cfg.forecast_csv, csv.str());
  }
  return exit_ok;
}

// ---------------------------------------------------------------- forecast

int cmd_forecast(const RunConfig& cfg, std::ostream& out) {
  require(cfg.checkpoint, "--checkpoint");
  require(cfg.data, "--data");
  const Checkpoint cp = load_checkpoint(cfg.checkpoint);
  const TimeSeriesFrame raw = load_csv(cfg.data);
  const TimeSeriesFrame filled = fill_gaps(checkpoint_channels(raw, cp.scaler), cfg.max_gap);
  const TimeSeriesFrame scaled = scale(filled, cp.scaler);

  Eigen::Index row = filled.length() - 1;
  if (!cfg.at.empty()) {
    const auto offset = (parse_timestamp(cfg.at) - filled.start).count();
    if (offset % filled.step_seconds != 0) {
      throw InvalidArgument("--at " + cfg.at + " is not on the data's time grid");
    }
    row = offset / filled.step_seconds;
    if (row < 0) {
      throw HistoryError("--at " + cfg.at + " precedes the data; a forecast needs " +
                         std::to_string(cp.lags.lookback) + " steps of history");
    }
    if (row >= filled.length()) throw InvalidArgument("--at " + cfg.at + " is after the last row");
  }
  const MatrixXd window = window_at(scaled, cp.lags, row);
  const VectorXd pred = forward(cp.model, window, false);
  const auto stations = cp.stations();
  const Eigen::Index horizon = cp.model.config.horizon;
  out << "forecast for " << format_timestamp(filled.time_at(row + horizon)) << " (horizon "
      << horizon << " from " << format_timestamp(filled.time_at(row)) << ")\n";
  for (std::size_t s = 0; s < stations.size(); ++s) {
    const auto& c = cp.scaler.at(stations[s]);
    const double level = std::clamp(c.unscale(pred(static_cast<Eigen::Index>(s))), 0.0, c.max);
    out << stations[s] << ' ' << format_double(level) << '\n';
  }
  return exit_ok;
}

// ---------------------------------------------------------------- search

std::string best_config_text(const RunConfig& cfg, const TrialConfig& best, Eigen::Index horizon) {
  std::ostringstream s;
  s << "cell=" << to_string(best.model.cell_kind) << '\n'
    << "hidden=" << best.model.hidden_size << '\n'
    << "layers=" << best.model.num_recurrent_layers << '\n'
    << "dropout=" << format_double(best.model.dropout_ratio) << '\n'
    << "batch-size=" << best.batch_size << '\n'
    << "optimizer=" << to_string(best.optimizer.kind) << '\n'
    << "learning-rate=" << format_double(best.optimizer.learning_rate) << '\n'
    << "clip-norm=" << format_double(best.optimizer.clip_norm) << '\n'
    << "epochs=" << best.epochs << '\n'
    << "patience=" << best.patience << '\n'
    << "horizon=" << horizon << '\n'
    << "seed=" << cfg.seed << '\n'
    << "train-fraction=" << format_double(cfg.train_fraction) << '\n'
    << "val-fraction=" << format_double(cfg.val_fraction) << '\n'
    << "max-gap=" << cfg.max_gap << '\n';
  if (cfg.lookback > 0) s << "lookback=" << cfg.lookback << '\n';
  return s.str();
}

template <typename T, typename Label>
void snap_base(std::vector<T>& axis, T& base, const char* name, std::ostream& err, Label label) {
  if (std::find(axis.begin(), axis.end(), base) != axis.end()) return;
  err << "note: base " << name << ' ' << label(base) << " is not a candidate; starting from "
      << label(axis.front()) << '\n';
  base = axis.front();
}

int cmd_search(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  require(cfg.data, "--data");
  require(cfg.out, "--out");
  if (cfg.horizons.size() != 1) throw UsageError("search takes exactly one --horizon");
  const Eigen::Index horizon = cfg.horizons.front();
  const TimeSeriesFrame raw = load_csv(cfg.data);
  const PipelineOptions po = pipeline_options(cfg);
  const PreparedFrame frame = prepare_frame(raw, po);
  const PreparedData data = prepare_windows(frame, horizon, po);

  TrialConfig base;
  base.model = model_config(cfg, frame, horizon);
  base.optimizer = optimizer_spec(cfg);
  base.batch_size = cfg.batch_size;
  base.epochs = cfg.epochs;
  base.patience = cfg.patience;
  SearchSpace space = SearchSpace::table3(base);
  space.base = base;
  if (!cfg.search_hidden.empty()) space.hidden_sizes = cfg.search_hidden;
  if (!cfg.search_batch.empty()) space.batch_sizes = cfg.search_batch;
  if (!cfg.search_optimizers.empty()) {
    space.optimizers.clear();
    for (const auto& name : cfg.search_optimizers) space.optimizers.push_back(parse_optimizer_kind(name));
  }
  if (!cfg.search_dropouts.empty()) space.dropouts = cfg.search_dropouts;

  auto num = [](auto v) { return std::to_string(v); };
  snap_base(space.hidden_sizes, space.base.model.hidden_size, "hidden", err, num);
  snap_base(space.batch_sizes, space.base.batch_size, "batch-size", err, num);
  if (std::find(space.optimizers.begin(), space.optimizers.end(), space.base.optimizer.kind) ==
      space.optimizers.end()) {
    err << "note: base optimizer " << to_string(space.base.optimizer.kind)
        << " is not a candidate; starting from " << to_string(space.optimizers.front()) << '\n';
    space.base = space.with_candidate(space.base, Axis::optimizer, 0);
  }
  snap_base(space.dropouts, space.base.model.dropout_ratio, "dropout", err,
            [](double v) { return format_double(v); });

  const std::string log_path = cfg.trial_log.empty() ? cfg.out + ".trials.jsonl" : cfg.trial_log;
  std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
  if (!log) throw IoError("cannot open trial log '" + log_path + "'");

  SearchOptions so;
  so.multi_pass = cfg.multi_pass;
  so.on_trial = [&](const TrialResult& t) {
    append_trial_log(t, log);
    out << "pass " << t.pass << ' ' << pad(to_string(t.axis), 12)
        << pad(space.candidate_label(t.axis, t.candidate), 10)
        << (t.ok() ? "val " + format_double(*t.val_loss) : "error: " + t.error) << '\n';
  };
  const Objective objective = training_objective(data.train, data.val, &data.test, &frame.scaler);
  const SearchResult result = coordinate_search(space, objective, so);

  write_file_atomic(cfg.out, best_config_text(cfg, result.best, horizon));
  out << result.trials.size() << " trials in " << result.passes << " pass(es); best validation loss "
      << format_double(result.best_loss) << '\n';
  out << "best: hidden " << result.best.model.hidden_size << ", batch " << result.best.batch_size
      << ", " << to_string(result.best.optimizer.kind) << ", dropout "
      << format_double(result.best.model.dropout_ratio) << '\n';
  out << "best config " << cfg.out << ", trial log " << log_path << '\n';
  return exit_ok;
}

void add_options(CLI::App& app, RunConfig& cfg) {
  app.add_option("--data", cfg.data, "input CSV");
  app.add_option("--out", cfg.out, "output path");
  app.add_option("--seed", cfg.seed, "random seed");
  app.add_option("--horizon", cfg.horizons, "forecast horizon(s), comma separated")->delimiter(',');
  app.add_option("--cell", cfg.cell, "ffnn|rnn|lstm|gru");
  app.add_option("--hidden", cfg.hidden, "hidden units per layer");
  app.add_option("--layers", cfg.layers, "hidden layers");
  app.add_option("--dropout", cfg.dropout, "dropout ratio before the output layer");
  app.add_option("--lookback", cfg.lookback, "fixed window length (default: from lag selection)");
  app.add_option("--optimizer", cfg.optimizer, "sgd|adam|rmsprop|adagrad|adadelta|adamax|nadam");
  app.add_option("--learning-rate", cfg.learning_rate, "learning rate (default: per optimizer)");
  app.add_option("--clip-norm", cfg.clip_norm, "global gradient norm clip, 0 disables");
  app.add_option("--epochs", cfg.epochs, "maximum epochs");
  app.add_option("--batch-size", cfg.batch_size, "mini-batch size");
  app.add_option("--patience", cfg.patience, "early-stopping patience, 0 disables");
  app.add_option("--train-fraction", cfg.train_fraction, "leading fraction of rows for training");
  app.add_option("--val-fraction", cfg.val_fraction, "tail of the training windows for validation");
  app.add_option("--max-gap", cfg.max_gap, "longest gap filled forward");
  app.add_option("--acf-threshold", cfg.acf_threshold, "autocorrelation cut-off for level lags");
  app.add_option("--lookback-cap", cfg.lookback_cap, "largest lag considered");
  app.add_option("--top-m", cfg.top_m, "rain lags kept per station");
  app.add_option("--significance-z", cfg.significance_z, "z value of the correlation bound");
  app.add_option("--baseline", cfg.baseline, "none|persistence|linear_ar");
  app.add_option("--baseline-lags", cfg.baseline_lags, "lag order of linear_ar");
  app.add_option("--ridge", cfg.ridge, "ridge penalty of linear_ar");
  app.add_option("--checkpoint", cfg.checkpoint, "checkpoint file");
  app.add_option("--at", cfg.at, "forecast origin, YYYY-MM-DDTHH:MM:SSZ");
  app.add_option("--subset", cfg.subset, "test|train|all");
  app.add_option("--forecast-csv", cfg.forecast_csv, "write observed vs forecast levels");
  app.add_option("--steps", cfg.steps, "synthetic series length");
  app.add_option("--storm-rate", cfg.storm_rate, "storm arrival probability per step");
  app.add_option("--storm-duration", cfg.storm_duration, "mean storm length in steps");
  app.add_option("--storm-intensity", cfg.storm_intensity, "mean storm intensity");
  app.add_option("--noise", cfg.noise, "level noise scale");
  app.add_option("--trial-log", cfg.trial_log, "search trial log (default: <out>.trials.jsonl)");
  app.add_option("--search-hidden", cfg.search_hidden, "hidden size candidates")->delimiter(',');
  app.add_option("--search-batch", cfg.search_batch, "batch size candidates")->delimiter(',');
  app.add_option("--search-optimizers", cfg.search_optimizers, "optimizer candidates")->delimiter(',');
  app.add_option("--search-dropouts", cfg.search_dropouts, "dropout candidates")->delimiter(',');
  app.add_flag("--multi-pass", cfg.multi_pass, "repeat passes until no axis changes");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-station water level forecasting", "deepcso"};
  app.set_config("--config", "", "key=value file mirroring the flag names");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  RunConfig cfg;
  add_options(app, cfg);
  auto* synth = app.add_subcommand("synth", "generate a synthetic catchment CSV")->fallthrough();
  auto* lags = app.add_subcommand("lags", "show the selected input lags")->fallthrough();
  auto* train = app.add_subcommand("train", "train one model per horizon")->fallthrough();
  auto* eval = app.add_subcommand("evaluate", "per-station cc/rmse/nse of a checkpoint")->fallthrough();
  auto* fc = app.add_subcommand("forecast", "forecast every station from one window")->fallthrough();
  auto* search = app.add_subcommand("search", "one-axis-at-a-time hyperparameter search")->fallthrough();

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? exit_ok : exit_usage_error;
  }
  cfg.seed_given = app.get_option("--seed")->count() > 0;

  try {
    if (synth->parsed()) return cmd_synth(cfg, out);
    if (lags->parsed()) return cmd_lags(cfg, out);
    if (train->parsed()) return cmd_train(cfg, out);
    if (eval->parsed()) return cmd_evaluate(cfg, out);
    if (fc->parsed()) return cmd_forecast(cfg, out);
    if (search->parsed()) return cmd_search(cfg, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return exit_usage_error;
  } catch (const IoError& e) {
    err << "error [" << e.domain() << "]: " << e.what() << '\n';
    return exit_usage_error;
  } catch (const Error& e) {
    err << "error [" << e.domain() << "]: " << e.what() << '\n';
    return exit_domain_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_domain_error;
  }
  return exit_usage_error;
}

}  // namespace deepcso
