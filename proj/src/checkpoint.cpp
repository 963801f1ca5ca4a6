#include "deepcso/checkpoint.hpp"

#include <set>

#include "json.hpp"

namespace deepcso {

using nlohmann::ordered_json;

std::vector<std::string> Checkpoint::stations() const { return scaler.ids(ChannelKind::level); }

void Checkpoint::validate() const {
  model.config.validate();
  lags.validate();
  const auto ids = stations();
  if (static_cast<Eigen::Index>(ids.size()) != model.config.num_stations) {
    throw SchemaError("checkpoint: scaler has " + std::to_string(ids.size()) +
                      " level channels, model has " +
                      std::to_string(model.config.num_stations) + " outputs");
  }
  if (static_cast<Eigen::Index>(lags.channels.size()) != model.config.input_channels) {
    throw SchemaError("checkpoint: lag spec lists " + std::to_string(lags.channels.size()) +
                      " channels, model expects " +
                      std::to_string(model.config.input_channels));
  }
  if (lags.lookback != model.config.lookback) {
    throw SchemaError("checkpoint: lag spec lookback differs from model lookback");
  }
  for (const auto& id : lags.input_ids()) scaler.at(id);
}

namespace {

void check_keys(const ordered_json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!obj.is_object()) throw SchemaError("checkpoint: '" + where + "' must be an object");
  const std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!known.count(item.key())) {
      throw SchemaError("checkpoint: unknown field '" + item.key() + "' in " + where);
    }
  }
  for (const char* key : allowed) {
    if (!obj.contains(key)) {
      throw SchemaError("checkpoint: missing field '" + std::string(key) + "' in " + where);
    }
  }
}

ordered_json config_to_json(const ModelConfig& c) {
  ordered_json j;
  j["cell_kind"] = to_string(c.cell_kind);
  j["hidden_size"] = c.hidden_size;
  j["num_recurrent_layers"] = c.num_recurrent_layers;
  j["num_stations"] = c.num_stations;
  j["lookback"] = c.lookback;
  j["horizon"] = c.horizon;
  j["dropout_ratio"] = c.dropout_ratio;
  j["input_channels"] = c.input_channels;
  j["seed"] = c.seed;
  return j;
}

ModelConfig config_from_json(const ordered_json& j) {
  check_keys(j,
             {"cell_kind", "hidden_size", "num_recurrent_layers", "num_stations", "lookback",
              "horizon", "dropout_ratio", "input_channels", "seed"},
             "config");
  ModelConfig c;
  c.cell_kind = parse_cell_kind(j.at("cell_kind").get<std::string>());
  c.hidden_size = j.at("hidden_size").get<Eigen::Index>();
  c.num_recurrent_layers = j.at("num_recurrent_layers").get<Eigen::Index>();
  c.num_stations = j.at("num_stations").get<Eigen::Index>();
  c.lookback = j.at("lookback").get<Eigen::Index>();
  c.horizon = j.at("horizon").get<Eigen::Index>();
  c.dropout_ratio = j.at("dropout_ratio").get<double>();
  c.input_channels = j.at("input_channels").get<Eigen::Index>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

ordered_json scaler_to_json(const ScalerParams& s) {
  ordered_json arr = ordered_json::array();
  for (const auto& c : s.channels) {
    ordered_json j;
    j["id"] = c.id;
    j["min"] = c.min;
    j["max"] = c.max;
    arr.push_back(std::move(j));
  }
  return arr;
}

ScalerParams scaler_from_json(const ordered_json& arr) {
  if (!arr.is_array()) throw SchemaError("checkpoint: 'scaler' must be an array");
  ScalerParams s;
  for (const auto& j : arr) {
    check_keys(j, {"id", "min", "max"}, "scaler entry");
    ChannelScale c;
    c.id = j.at("id").get<std::string>();
    c.kind = channel_kind_from_id(c.id);
    c.min = j.at("min").get<double>();
    c.max = j.at("max").get<double>();
    if (!(c.max > c.min)) throw SchemaError("checkpoint: scaler for '" + c.id + "' has max <= min");
    s.channels.push_back(std::move(c));
  }
  return s;
}

ordered_json lags_to_json(const LagSpec& l) {
  ordered_json j;
  j["lookback"] = l.lookback;
  ordered_json channels = ordered_json::array();
  for (const auto& c : l.channels) {
    ordered_json e;
    e["id"] = c.id;
    e["lags"] = c.lags;
    channels.push_back(std::move(e));
  }
  j["channels"] = std::move(channels);
  return j;
}

LagSpec lags_from_json(const ordered_json& j) {
  check_keys(j, {"lookback", "channels"}, "lag_spec");
  LagSpec l;
  l.lookback = j.at("lookback").get<Eigen::Index>();
  for (const auto& e : j.at("channels")) {
    check_keys(e, {"id", "lags"}, "lag_spec channel");
    l.channels.push_back({e.at("id").get<std::string>(),
                          e.at("lags").get<std::vector<Eigen::Index>>()});
  }
  l.validate();
  return l;
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& checkpoint) {
  checkpoint.validate();
  ordered_json doc;
  doc["version"] = kCheckpointVersion;
  doc["config"] = config_to_json(checkpoint.model.config);
  doc["scaler"] = scaler_to_json(checkpoint.scaler);
  doc["lag_spec"] = lags_to_json(checkpoint.lags);
  ordered_json params = ordered_json::object();
  checkpoint.model.params.for_each_block(
      [&params](const std::string& name, Eigen::Ref<const MatrixXd> block) {
        ordered_json entry;
        entry["rows"] = block.rows();
        entry["cols"] = block.cols();
        std::vector<double> values;
        values.reserve(static_cast<std::size_t>(block.size()));
        for (Eigen::Index r = 0; r < block.rows(); ++r) {
          for (Eigen::Index c = 0; c < block.cols(); ++c) values.push_back(block(r, c));
        }
        entry["values"] = std::move(values);
        params[name] = std::move(entry);
      });
  doc["parameters"] = std::move(params);
  return doc.dump(1) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("malformed checkpoint", e.byte);
  }
  try {
    if (!doc.is_object()) throw SchemaError("checkpoint: top level must be an object");
    if (!doc.contains("version")) throw SchemaError("checkpoint: missing field 'version'");
    const auto& version = doc.at("version");
    if (!version.is_number_integer() || version.get<int>() != kCheckpointVersion) {
      throw UnsupportedVersion("checkpoint version " + version.dump() + " is not supported (expected " +
                               std::to_string(kCheckpointVersion) + ")");
    }
    check_keys(doc, {"version", "config", "scaler", "lag_spec", "parameters"}, "checkpoint");

    Checkpoint cp;
    cp.model = build_model(config_from_json(doc.at("config")));
    cp.scaler = scaler_from_json(doc.at("scaler"));
    cp.lags = lags_from_json(doc.at("lag_spec"));

    const auto& params = doc.at("parameters");
    if (!params.is_object()) throw SchemaError("checkpoint: 'parameters' must be an object");
    std::size_t seen = 0;
    cp.model.params.for_each_block([&](const std::string& name, Eigen::Ref<MatrixXd> block) {
      if (!params.contains(name)) throw SchemaError("checkpoint: missing parameter '" + name + "'");
      const auto& entry = params.at(name);
      check_keys(entry, {"rows", "cols", "values"}, "parameter '" + name + "'");
      const auto rows = entry.at("rows").get<Eigen::Index>();
      const auto cols = entry.at("cols").get<Eigen::Index>();
      const auto& values = entry.at("values");
      if (rows != block.rows() || cols != block.cols() || !values.is_array() ||
          static_cast<Eigen::Index>(values.size()) != rows * cols) {
        throw SchemaError("checkpoint: parameter '" + name + "' should be " +
                          detail::shape_of(block));
      }
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) block(r, c) = values[k++].get<double>();
      }
      ++seen;
    });
    if (seen != params.size()) throw SchemaError("checkpoint: unknown entries in 'parameters'");
    cp.validate();
    return cp;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  write_file_atomic(path, checkpoint_to_string(checkpoint));
}

Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_string(read_file(path)); }

}  // namespace deepcso
