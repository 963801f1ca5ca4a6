#include "deepcso/model.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace deepcso {

namespace {

struct ForwardTrace {
  std::vector<std::vector<StepCache<double>>> layers;  // [layer][step]
  MatrixXd mask;                                       // empty when no dropout
  MatrixXd top;                                        // after dropout
};

MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double ratio, SeededRng& rng) {
  const double keep_scale = 1.0 / (1.0 - ratio);
  MatrixXd mask(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      mask(i, j) = rng.bernoulli(ratio) ? 0.0 : keep_scale;
    }
  }
  return mask;
}

void check_ratio(double ratio) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw InvalidArgument("dropout ratio must lie in [0, 1), got " + std::to_string(ratio));
  }
}

void check_steps(const Model& model, const std::vector<MatrixXd>& steps) {
  const auto& cfg = model.config;
  if (static_cast<Eigen::Index>(steps.size()) != cfg.lookback) {
    throw ShapeError("window has " + std::to_string(steps.size()) + " steps, model expects " +
                     std::to_string(cfg.lookback));
  }
  for (const auto& x : steps) {
    if (x.rows() != cfg.input_channels || x.cols() != steps.front().cols()) {
      throw ShapeError("window step is " + detail::shape_of(x) + ", model expects " +
                       std::to_string(cfg.input_channels) + " channels");
    }
  }
}

MatrixXd flatten_window(const std::vector<MatrixXd>& steps) {
  const Eigen::Index channels = steps.front().rows();
  MatrixXd x(channels * static_cast<Eigen::Index>(steps.size()), steps.front().cols());
  for (std::size_t s = 0; s < steps.size(); ++s) {
    x.middleRows(static_cast<Eigen::Index>(s) * channels, channels) = steps[s];
  }
  return x;
}

MatrixXd run_forward(const Model& model, const std::vector<MatrixXd>& steps, bool training,
                     SeededRng* rng, ForwardTrace* trace) {
  check_steps(model, steps);
  const auto& cfg = model.config;
  const bool keep_cache = trace != nullptr;
  const Eigen::Index batch = steps.front().cols();
  if (trace) trace->layers.assign(model.params.layers.size(), {});

  MatrixXd top;
  if (cfg.cell_kind == CellKind::ffnn) {
    MatrixXd x = flatten_window(steps);
    for (std::size_t l = 0; l < model.params.layers.size(); ++l) {
      auto res = ffnn_step(x, model.params.layers[l], Activation::tanh, keep_cache);
      if (trace) trace->layers[l].push_back(std::move(*res.cache));
      x = std::move(res.state.h);
    }
    top = std::move(x);
  } else {
    std::vector<MatrixXd> sequence = steps;
    for (std::size_t l = 0; l < model.params.layers.size(); ++l) {
      const auto& params = model.params.layers[l];
      auto state = CellState<double>::zeros(cfg.cell_kind, cfg.hidden_size, batch);
      for (auto& x : sequence) {
        auto res = cell_step(x, state, params, keep_cache);
        if (trace) trace->layers[l].push_back(std::move(*res.cache));
        state = std::move(res.state);
        x = state.h;
      }
    }
    top = std::move(sequence.back());
  }

  if (training && cfg.dropout_ratio > 0.0) {
    if (rng == nullptr) throw InvalidArgument("training forward with dropout needs an rng");
    MatrixXd mask = dropout_mask(top.rows(), top.cols(), cfg.dropout_ratio, *rng);
    top = top.cwiseProduct(mask);
    if (trace) trace->mask = std::move(mask);
  }
  MatrixXd out = model.params.out_weights * top;
  out.colwise() += model.params.out_bias;
  if (trace) trace->top = std::move(top);
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](Eigen::Index v, const char* field) {
    if (v < 1) throw ConfigError(std::string("model config: ") + field + " must be >= 1");
  };
  positive(hidden_size, "hidden_size");
  positive(num_recurrent_layers, "num_recurrent_layers");
  positive(num_stations, "num_stations");
  positive(lookback, "lookback");
  positive(horizon, "horizon");
  positive(input_channels, "input_channels");
  if (!(dropout_ratio >= 0.0 && dropout_ratio < 1.0)) {
    throw ConfigError("model config: dropout_ratio must lie in [0, 1)");
  }
}

Eigen::Index ParameterSet::size() const {
  Eigen::Index n = out_weights.size() + out_bias.size();
  for (const auto& l : layers) n += l.parameter_count();
  return n;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& l : layers) {
    out.layers.push_back(CellParams<double>::zeros(l.kind, l.input_size, l.hidden_size));
  }
  out.out_weights = MatrixXd::Zero(out_weights.rows(), out_weights.cols());
  out.out_bias = VectorXd::Zero(out_bias.size());
  return out;
}

void ParameterSet::for_each_block(
    const std::function<void(const std::string&, Eigen::Ref<MatrixXd>)>& visit) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& layer = layers[l];
    for (int g = 0; g < static_cast<int>(layer.gates.size()); ++g) {
      const std::string prefix =
          "layer" + std::to_string(l + 1) + "." + gate_name(layer.kind, g) + ".";
      visit(prefix + "weights", layer.gates[g].weights);
      auto& b = layer.gates[g].bias;
      visit(prefix + "bias", Eigen::Map<MatrixXd>(b.data(), b.size(), 1));
    }
  }
  visit("dense.weights", out_weights);
  visit("dense.bias", Eigen::Map<MatrixXd>(out_bias.data(), out_bias.size(), 1));
}

void ParameterSet::for_each_block(
    const std::function<void(const std::string&, Eigen::Ref<const MatrixXd>)>& visit) const {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    for (int g = 0; g < static_cast<int>(layer.gates.size()); ++g) {
      const std::string prefix =
          "layer" + std::to_string(l + 1) + "." + gate_name(layer.kind, g) + ".";
      visit(prefix + "weights", layer.gates[g].weights);
      const auto& b = layer.gates[g].bias;
      visit(prefix + "bias", Eigen::Map<const MatrixXd>(b.data(), b.size(), 1));
    }
  }
  visit("dense.weights", out_weights);
  visit("dense.bias", Eigen::Map<const MatrixXd>(out_bias.data(), out_bias.size(), 1));
}

VectorXd ParameterSet::pack() const {
  VectorXd flat(size());
  Eigen::Index offset = 0;
  for_each_block([&](const std::string&, Eigen::Ref<const MatrixXd> block) {
    flat.segment(offset, block.size()) = block.reshaped();
    offset += block.size();
  });
  return flat;
}

void ParameterSet::unpack(const VectorXd& flat) {
  if (flat.size() != size()) {
    throw ShapeError("unpack: flat vector has " + std::to_string(flat.size()) +
                     " entries, parameter set has " + std::to_string(size()));
  }
  Eigen::Index offset = 0;
  for_each_block([&](const std::string&, Eigen::Ref<MatrixXd> block) {
    block.reshaped() = flat.segment(offset, block.size());
    offset += block.size();
  });
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  if (layers.size() != other.layers.size() || size() != other.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].kind != other.layers[l].kind ||
        layers[l].input_size != other.layers[l].input_size ||
        layers[l].hidden_size != other.layers[l].hidden_size) {
      return false;
    }
  }
  if (out_weights.rows() != other.out_weights.rows()) return false;
  const VectorXd a = pack();
  const VectorXd b = other.pack();
  return std::equal(a.data(), a.data() + a.size(), b.data());
}

Model build_model(const ModelConfig& config) {
  config.validate();
  SeededRng rng(config.seed);
  Model model{config, {}};
  Eigen::Index in = config.cell_kind == CellKind::ffnn ? config.lookback * config.input_channels
                                                       : config.input_channels;
  for (Eigen::Index l = 0; l < config.num_recurrent_layers; ++l) {
    model.params.layers.push_back(
        CellParams<double>::random(config.cell_kind, in, config.hidden_size, rng));
    in = config.hidden_size;
  }
  model.params.out_weights =
      init_params<double>(config.num_stations, config.hidden_size, rng, InitScheme::uniform_fanin);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.hidden_size));
  model.params.out_bias.resize(config.num_stations);
  for (Eigen::Index i = 0; i < config.num_stations; ++i) {
    model.params.out_bias(i) = rng.uniform(-bound, bound);
  }
  return model;
}

Batch make_batch(const WindowedDataset& dataset, std::span<const Eigen::Index> indices) {
  Batch batch;
  const auto b = static_cast<Eigen::Index>(indices.size());
  const Eigen::Index channels = static_cast<Eigen::Index>(dataset.input_channels.size());
  batch.steps.assign(static_cast<std::size_t>(dataset.lookback), MatrixXd(channels, b));
  batch.targets.resize(dataset.targets.rows(), b);
  for (Eigen::Index k = 0; k < b; ++k) {
    const Eigen::Index idx = indices[static_cast<std::size_t>(k)];
    if (idx < 0 || idx >= dataset.size()) throw InvalidArgument("make_batch: index out of range");
    const MatrixXd& window = dataset.inputs[static_cast<std::size_t>(idx)];
    for (Eigen::Index s = 0; s < dataset.lookback; ++s) {
      batch.steps[static_cast<std::size_t>(s)].col(k) = window.row(s).transpose();
    }
    batch.targets.col(k) = dataset.targets.col(idx);
  }
  return batch;
}

Batch make_batch(const WindowedDataset& dataset) {
  std::vector<Eigen::Index> all(static_cast<std::size_t>(dataset.size()));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  return make_batch(dataset, all);
}

VectorXd apply_dropout(const VectorXd& v, double ratio, SeededRng& rng, bool training) {
  check_ratio(ratio);
  if (!training || ratio == 0.0) return v;
  return v.cwiseProduct(dropout_mask(v.size(), 1, ratio, rng));
}

VectorXd forward(const Model& model, const MatrixXd& window, bool training, SeededRng* rng) {
  if (window.rows() != model.config.lookback || window.cols() != model.config.input_channels) {
    throw ShapeError("window is " + detail::shape_of(window) + ", model expects " +
                     std::to_string(model.config.lookback) + "x" +
                     std::to_string(model.config.input_channels));
  }
  std::vector<MatrixXd> steps;
  for (Eigen::Index s = 0; s < window.rows(); ++s) steps.emplace_back(window.row(s).transpose());
  return run_forward(model, steps, training, rng, nullptr).col(0);
}

MatrixXd predict(const Model& model, const std::vector<MatrixXd>& steps) {
  return run_forward(model, steps, false, nullptr, nullptr);
}

MatrixXd predict(const Model& model, const WindowedDataset& dataset) {
  constexpr Eigen::Index chunk = 2048;
  MatrixXd out(model.config.num_stations, dataset.size());
  std::vector<Eigen::Index> idx;
  for (Eigen::Index begin = 0; begin < dataset.size(); begin += chunk) {
    const Eigen::Index end = std::min(dataset.size(), begin + chunk);
    idx.resize(static_cast<std::size_t>(end - begin));
    std::iota(idx.begin(), idx.end(), begin);
    out.middleCols(begin, end - begin) = predict(model, make_batch(dataset, idx).steps);
  }
  return out;
}

Loss mse_loss(const VectorXd& pred, const VectorXd& target) {
  if (pred.size() != target.size() || pred.size() == 0) {
    throw ShapeError("mse_loss: prediction has " + std::to_string(pred.size()) +
                     " entries, target " + std::to_string(target.size()));
  }
  const VectorXd diff = pred - target;
  const double n = static_cast<double>(pred.size());
  return {diff.squaredNorm() / n, (2.0 / n) * diff};
}

BpttResult bptt(const Model& model, const Batch& batch, SeededRng* rng) {
  if (batch.size() == 0) throw InvalidArgument("bptt: empty batch");
  if (batch.targets.rows() != model.config.num_stations) {
    throw ShapeError("bptt: targets have " + std::to_string(batch.targets.rows()) +
                     " stations, model has " + std::to_string(model.config.num_stations));
  }
  const auto& cfg = model.config;
  const auto& params = model.params;
  ForwardTrace trace;
  const bool use_dropout = rng != nullptr && cfg.dropout_ratio > 0.0;
  const MatrixXd pred = run_forward(model, batch.steps, use_dropout, rng, &trace);

  const double count = static_cast<double>(pred.size());
  const MatrixXd diff = pred - batch.targets;
  BpttResult result;
  result.loss = diff.squaredNorm() / count;
  result.grads = params.zeros_like();
  auto& grads = result.grads;

  const MatrixXd d_pred = (2.0 / count) * diff;
  grads.out_weights.noalias() = d_pred * trace.top.transpose();
  grads.out_bias = d_pred.rowwise().sum();
  MatrixXd d_top = params.out_weights.transpose() * d_pred;
  if (trace.mask.size() > 0) d_top = d_top.cwiseProduct(trace.mask);

  const auto num_layers = params.layers.size();
  if (cfg.cell_kind == CellKind::ffnn) {
    MatrixXd d_out = std::move(d_top);
    for (std::size_t l = num_layers; l-- > 0;) {
      auto g = cell_step_backward(trace.layers[l][0], d_out, nullptr, params.layers[l],
                                  grads.layers[l]);
      d_out = std::move(g.x);
    }
    return result;
  }

  // Gradient arriving at each step's output from the layer above.
  const auto steps = static_cast<std::size_t>(cfg.lookback);
  std::vector<MatrixXd> from_above(steps);
  from_above.back() = std::move(d_top);
  const bool lstm = cfg.cell_kind == CellKind::lstm;
  for (std::size_t l = num_layers; l-- > 0;) {
    MatrixXd d_h = MatrixXd::Zero(cfg.hidden_size, batch.size());
    MatrixXd d_c = MatrixXd::Zero(lstm ? cfg.hidden_size : 0, batch.size());
    std::vector<MatrixXd> to_below(steps);
    for (std::size_t s = steps; s-- > 0;) {
      if (from_above[s].size() > 0) d_h += from_above[s];
      auto g = cell_step_backward(trace.layers[l][s], d_h, lstm ? &d_c : nullptr,
                                  params.layers[l], grads.layers[l]);
      d_h = std::move(g.h_prev);
      if (lstm) d_c = std::move(*g.c_prev);
      if (l > 0) to_below[s] = std::move(g.x);
    }
    from_above = std::move(to_below);
  }
  return result;
}

double dataset_loss(const Model& model, const WindowedDataset& dataset) {
  if (dataset.empty()) throw InvalidArgument("dataset_loss: empty dataset");
  const MatrixXd pred = predict(model, dataset);
  return (pred - dataset.targets).squaredNorm() / static_cast<double>(pred.size());
}

const char* to_string(StopReason reason) {
  return reason == StopReason::early_stop ? "early_stop" : "max_epochs";
}

double TrainReport::best_val_loss() const {
  if (val_loss.empty()) return initial_val_loss;
  return *std::min_element(val_loss.begin(), val_loss.end());
}

namespace {

void check_dataset(const ModelConfig& cfg, const WindowedDataset& data, const char* which) {
  if (data.empty()) throw InvalidArgument(std::string("fit: ") + which + " dataset is empty");
  if (data.lookback != cfg.lookback ||
      static_cast<Eigen::Index>(data.input_channels.size()) != cfg.input_channels ||
      data.targets.rows() != cfg.num_stations) {
    throw ConfigError(std::string("fit: ") + which + " dataset (lookback " +
                      std::to_string(data.lookback) + ", " +
                      std::to_string(data.input_channels.size()) + " channels, " +
                      std::to_string(data.targets.rows()) +
                      " stations) does not match the model config");
  }
  if (data.horizon != cfg.horizon) {
    throw ConfigError(std::string("fit: ") + which + " dataset horizon " +
                      std::to_string(data.horizon) + " differs from model horizon " +
                      std::to_string(cfg.horizon));
  }
}

}  // namespace

TrainReport fit(Model& model, const WindowedDataset& train, const WindowedDataset& val,
                const FitOptions& options, SeededRng& rng, const EpochCallback& on_epoch) {
  const auto started = std::chrono::steady_clock::now();
  model.config.validate();
  options.optimizer.validate();
  if (options.epochs < 0) throw ConfigError("fit: epochs must be >= 0");
  if (options.batch_size < 1) throw ConfigError("fit: batch_size must be >= 1");
  if (options.patience < 0) throw ConfigError("fit: patience must be >= 0");
  check_dataset(model.config, train, "training");
  check_dataset(model.config, val, "validation");

  TrainReport report;
  report.initial_val_loss = dataset_loss(model, val);
  VectorXd flat = model.params.pack();
  VectorXd best = flat;
  double best_loss = std::numeric_limits<double>::infinity();
  Eigen::Index since_best = 0;
  auto state = OptimizerState::init(options.optimizer, flat.size());

  std::vector<Eigen::Index> order(static_cast<std::size_t>(train.size()));
  for (Eigen::Index epoch = 1; epoch <= options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    rng.shuffle(std::span<Eigen::Index>(order));
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(options.batch_size));
      const Batch batch =
          make_batch(train, std::span<const Eigen::Index>(order.data() + begin, end - begin));
      auto step = bptt(model, batch, &rng);
      loss_sum += step.loss * static_cast<double>(end - begin);
      optimizer_step(flat, step.grads.pack(), state, options.optimizer);
      model.params.unpack(flat);
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());
    const double val_loss = dataset_loss(model, val);
    report.train_loss.push_back(train_loss);
    report.val_loss.push_back(val_loss);
    report.epochs_run = epoch;
    if (on_epoch) on_epoch(epoch, train_loss, val_loss);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
      throw InvalidState("fit: loss diverged at epoch " + std::to_string(epoch));
    }
    if (val_loss < best_loss) {
      best_loss = val_loss;
      best = flat;
      report.best_epoch = epoch;
      since_best = 0;
    } else if (options.patience > 0 && ++since_best >= options.patience) {
      report.stop_reason = StopReason::early_stop;
      break;
    }
  }
  if (report.epochs_run > 0) model.params.unpack(best);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace deepcso
