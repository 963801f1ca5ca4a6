#include "deepcso/data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace deepcso {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string::size_type pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    if (comma == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
}

std::string row_label(std::size_t line_number) { return "row " + std::to_string(line_number); }

// Inverse of the standard normal CDF by bisection; only used for a handful
// of significance bounds.
double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double cdf = 0.5 * std::erfc(-mid / std::sqrt(2.0));
    (cdf < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Two-pass Pearson correlation over pairs where both sides are present.
std::optional<double> pairwise_correlation(const double* a, const double* b, Eigen::Index n) {
  double sum_a = 0.0, sum_b = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (is_missing(a[i]) || is_missing(b[i])) continue;
    sum_a += a[i];
    sum_b += b[i];
    ++count;
  }
  if (count < 2) return std::nullopt;
  const double mean_a = sum_a / static_cast<double>(count);
  const double mean_b = sum_b / static_cast<double>(count);
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (is_missing(a[i]) || is_missing(b[i])) continue;
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a <= 0.0 || var_b <= 0.0) return std::nullopt;
  return cov / (std::sqrt(var_a) * std::sqrt(var_b));
}

bool has_variance(const VectorXd& series) {
  std::optional<double> first;
  for (Eigen::Index i = 0; i < series.size(); ++i) {
    if (is_missing(series(i))) continue;
    if (!first) {
      first = series(i);
    } else if (series(i) != *first) {
      return true;
    }
  }
  return false;
}

VectorXd train_column(const TimeSeriesFrame& frame, Eigen::Index col, RowRange rows) {
  return frame.values.col(col).segment(rows.begin, rows.size());
}

}  // namespace

ChannelKind channel_kind_from_id(const std::string& id) {
  return id.rfind("rain_", 0) == 0 ? ChannelKind::rain : ChannelKind::level;
}

std::optional<Eigen::Index> TimeSeriesFrame::find_channel(const std::string& id) const {
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i].id == id) return static_cast<Eigen::Index>(i);
  }
  return std::nullopt;
}

Eigen::Index TimeSeriesFrame::channel_index(const std::string& id) const {
  if (auto idx = find_channel(id)) return *idx;
  throw SchemaError("channel '" + id + "' not present in frame");
}

std::vector<std::string> TimeSeriesFrame::channel_ids(std::optional<ChannelKind> kind) const {
  std::vector<std::string> out;
  for (const auto& c : channels) {
    if (!kind || c.kind == *kind) out.push_back(c.id);
  }
  return out;
}

Eigen::Index TimeSeriesFrame::missing_count() const {
  return values.unaryExpr([](double v) { return is_missing(v) ? Eigen::Index{1} : Eigen::Index{0}; })
      .sum();
}

void TimeSeriesFrame::validate() const {
  if (step_seconds <= 0) throw IngestionError("frame step must be positive");
  if (static_cast<Eigen::Index>(channels.size()) != values.cols()) {
    throw IngestionError("frame has " + std::to_string(channels.size()) + " channels but " +
                         std::to_string(values.cols()) + " value columns");
  }
  std::set<std::string> seen;
  for (const auto& c : channels) {
    if (c.id.empty()) throw IngestionError("empty channel id");
    if (!seen.insert(c.id).second) throw IngestionError("duplicate channel id '" + c.id + "'");
  }
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      const double v = values(i, j);
      if (is_missing(v)) continue;
      if (!std::isfinite(v)) {
        throw IngestionError("non-finite value in channel '" + channels[j].id + "'");
      }
      if (channels[j].kind == ChannelKind::level && v < 0.0) {
        throw IngestionError("negative level in channel '" + channels[j].id + "' at row " +
                             std::to_string(i));
      }
    }
  }
}

TimePoint parse_timestamp(const std::string& text) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
  int consumed = 0;
  if (text.size() != 20 ||
      std::sscanf(text.c_str(), "%4d-%2u-%2uT%2u:%2u:%2uZ%n", &y, &mo, &d, &h, &mi, &s,
                  &consumed) != 6 ||
      consumed != 20) {
    throw IngestionError("malformed timestamp '" + text + "' (expected YYYY-MM-DDTHH:MM:SSZ)");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo},
                                        std::chrono::day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) {
    throw IngestionError("invalid timestamp '" + text + "'");
  }
  return std::chrono::sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi} +
         std::chrono::seconds{s};
}

std::string format_timestamp(TimePoint t) {
  const auto day = std::chrono::floor<std::chrono::days>(t);
  const std::chrono::year_month_day ymd{day};
  const std::chrono::hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

TimeSeriesFrame read_csv(std::istream& in, std::int64_t expected_step) {
  if (expected_step <= 0) throw InvalidArgument("expected step must be positive");
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("row 1: empty file, missing header");
  const auto header = split_fields(line);
  if (header.empty() || header[0] != "timestamp" || header.size() < 2) {
    throw IngestionError("row 1: header must be 'timestamp,<channel_id>,...'");
  }
  TimeSeriesFrame frame;
  frame.step_seconds = expected_step;
  for (std::size_t i = 1; i < header.size(); ++i) {
    frame.channels.push_back({header[i], channel_kind_from_id(header[i])});
  }
  frame.values.resize(0, static_cast<Eigen::Index>(header.size() - 1));
  try {
    frame.validate();
  } catch (const IngestionError& e) {
    throw IngestionError(std::string("row 1: ") + e.what());
  }

  const std::size_t width = header.size() - 1;
  std::vector<std::vector<double>> rows;
  std::optional<TimePoint> previous;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw IngestionError(row_label(line_number) + ": expected " +
                           std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()));
    }
    TimePoint t;
    try {
      t = parse_timestamp(fields[0]);
    } catch (const IngestionError& e) {
      throw IngestionError(row_label(line_number) + ": " + e.what());
    }
    if (!previous) {
      frame.start = t;
    } else {
      const auto delta = (t - *previous).count();
      if (delta <= 0) {
        throw IngestionError(row_label(line_number) + ": timestamp " + fields[0] +
                             " is not after the previous row");
      }
      if (delta % expected_step != 0) {
        throw IngestionError(row_label(line_number) + ": timestamp " + fields[0] +
                             " is off the " + std::to_string(expected_step) + " s grid");
      }
      for (auto k = delta / expected_step; k > 1; --k) {
        rows.emplace_back(width, kMissing);
      }
    }
    previous = t;
    std::vector<double> values(width, kMissing);
    for (std::size_t j = 0; j < width; ++j) {
      const std::string& field = fields[j + 1];
      if (field.empty()) continue;
      double v = 0.0;
      const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
      if (res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(v)) {
        throw IngestionError(row_label(line_number) + ": cannot parse '" + field +
                             "' in channel '" + header[j + 1] + "'");
      }
      if (frame.channels[j].kind == ChannelKind::level && v < 0.0) {
        throw IngestionError(row_label(line_number) + ": negative level in channel '" +
                             header[j + 1] + "'");
      }
      values[j] = v;
    }
    rows.push_back(std::move(values));
  }

  frame.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      frame.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return frame;
}

TimeSeriesFrame load_csv(const std::string& path, std::int64_t expected_step) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read_csv(in, expected_step);
}

void write_csv(const TimeSeriesFrame& frame, std::ostream& out) {
  out << "timestamp";
  for (const auto& c : frame.channels) out << ',' << c.id;
  out << '\n';
  for (Eigen::Index i = 0; i < frame.length(); ++i) {
    out << format_timestamp(frame.time_at(i));
    for (Eigen::Index j = 0; j < frame.channel_count(); ++j) {
      out << ',';
      const double v = frame.values(i, j);
      if (!is_missing(v)) out << format_double(v);
    }
    out << '\n';
  }
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << contents;
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw IoError("failed writing '" + path + "'");
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("cannot move temporary file into '" + path + "'");
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void save_csv(const TimeSeriesFrame& frame, const std::string& path) {
  std::ostringstream buffer;
  write_csv(frame, buffer);
  write_file_atomic(path, buffer.str());
}

TimeSeriesFrame fill_gaps(const TimeSeriesFrame& frame, Eigen::Index max_gap) {
  if (max_gap < 0) throw InvalidArgument("fill_gaps: max_gap must be >= 0");
  TimeSeriesFrame out = frame;
  const Eigen::Index n = frame.length();
  for (Eigen::Index j = 0; j < frame.channel_count(); ++j) {
    Eigen::Index i = 0;
    while (i < n) {
      if (!is_missing(out.values(i, j))) {
        ++i;
        continue;
      }
      Eigen::Index run_end = i;
      while (run_end < n && is_missing(out.values(run_end, j))) ++run_end;
      if (i > 0 && run_end - i <= max_gap) {
        for (Eigen::Index k = i; k < run_end; ++k) out.values(k, j) = out.values(i - 1, j);
      }
      i = run_end;
    }
  }
  return out;
}

RowRange leading_rows(const TimeSeriesFrame& frame, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InvalidArgument("row fraction must lie in (0, 1]");
  }
  return {0, static_cast<Eigen::Index>(std::floor(static_cast<double>(frame.length()) * fraction))};
}

const ChannelScale& ScalerParams::at(const std::string& id) const {
  for (const auto& c : channels) {
    if (c.id == id) return c;
  }
  throw SchemaError("scaler has no channel '" + id + "'");
}

std::vector<std::string> ScalerParams::ids(std::optional<ChannelKind> kind) const {
  std::vector<std::string> out;
  for (const auto& c : channels) {
    if (!kind || c.kind == *kind) out.push_back(c.id);
  }
  return out;
}

ScalerParams fit_scaler(const TimeSeriesFrame& frame, RowRange train_rows) {
  if (train_rows.size() <= 0 || train_rows.begin < 0 || train_rows.end > frame.length()) {
    throw InvalidArgument("fit_scaler: training range is empty or outside the frame");
  }
  ScalerParams out;
  for (Eigen::Index j = 0; j < frame.channel_count(); ++j) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = train_rows.begin; i < train_rows.end; ++i) {
      const double v = frame.values(i, j);
      if (is_missing(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!(hi > lo)) {
      throw DegenerateError("channel '" + frame.channels[j].id +
                            "' is constant (or empty) on the training range");
    }
    out.channels.push_back({frame.channels[j].id, frame.channels[j].kind, lo, hi});
  }
  return out;
}

TimeSeriesFrame scale(const TimeSeriesFrame& frame, const ScalerParams& scaler) {
  TimeSeriesFrame out = frame;
  for (Eigen::Index j = 0; j < frame.channel_count(); ++j) {
    const auto& c = scaler.at(frame.channels[j].id);
    out.values.col(j) = frame.values.col(j).unaryExpr([&c](double v) { return c.scale(v); });
  }
  return out;
}

TimeSeriesFrame unscale(const TimeSeriesFrame& frame, const ScalerParams& scaler) {
  TimeSeriesFrame out = frame;
  for (Eigen::Index j = 0; j < frame.channel_count(); ++j) {
    const auto& c = scaler.at(frame.channels[j].id);
    out.values.col(j) = frame.values.col(j).unaryExpr([&c](double v) { return c.unscale(v); });
  }
  return out;
}

VectorXd unscale(const VectorXd& values, const ChannelScale& channel) {
  return values.unaryExpr([&channel](double v) { return channel.unscale(v); });
}

VectorXd autocorrelation(const VectorXd& series, Eigen::Index max_lag) {
  return cross_correlation(series, series, max_lag);
}

VectorXd cross_correlation(const VectorXd& a, const VectorXd& b, Eigen::Index max_lag) {
  if (max_lag < 0) throw InvalidArgument("correlation: max_lag must be >= 0");
  if (a.size() != b.size()) {
    throw ShapeError("cross_correlation: series lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  if (a.size() <= max_lag + 2) {
    throw InvalidArgument("correlation: series length " + std::to_string(a.size()) +
                          " must exceed max_lag + 2");
  }
  if (!has_variance(a) || !has_variance(b)) {
    throw DegenerateError("correlation: zero-variance series");
  }
  VectorXd out(max_lag + 1);
  const Eigen::Index n = a.size();
  for (Eigen::Index lag = 0; lag <= max_lag; ++lag) {
    const auto r = pairwise_correlation(a.data(), b.data() + lag, n - lag);
    if (!r) throw DegenerateError("correlation: degenerate overlap at lag " + std::to_string(lag));
    out(lag) = *r;
  }
  return out;
}

std::vector<std::string> LagSpec::input_ids() const {
  std::vector<std::string> out;
  for (const auto& c : channels) out.push_back(c.id);
  return out;
}

const ChannelLags* LagSpec::find(const std::string& id) const {
  for (const auto& c : channels) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

void LagSpec::validate() const {
  if (channels.empty()) throw LagSelectionError("lag spec selects no channel");
  Eigen::Index max_lag = 0;
  for (const auto& c : channels) {
    if (c.lags.empty()) throw LagSelectionError("channel '" + c.id + "' has no lags");
    for (std::size_t i = 0; i < c.lags.size(); ++i) {
      if (c.lags[i] < 0 || (i > 0 && c.lags[i] <= c.lags[i - 1])) {
        throw LagSelectionError("lags of '" + c.id + "' must be unique, ascending, >= 0");
      }
    }
    max_lag = std::max(max_lag, c.lags.back());
  }
  if (lookback < max_lag + 1) {
    throw LagSelectionError("lookback " + std::to_string(lookback) +
                            " is shorter than the largest lag + 1");
  }
}

LagSpec select_lags(const TimeSeriesFrame& frame, RowRange train_rows, const LagPolicy& policy) {
  if (train_rows.size() <= 0 || train_rows.begin < 0 || train_rows.end > frame.length()) {
    throw InvalidArgument("select_lags: training range is empty or outside the frame");
  }
  if (policy.fixed_lookback && *policy.fixed_lookback < 1) {
    throw InvalidArgument("select_lags: fixed lookback must be >= 1");
  }
  const Eigen::Index cap =
      policy.fixed_lookback ? *policy.fixed_lookback - 1 : policy.lookback_cap;
  if (cap < 0) throw InvalidArgument("select_lags: lookback cap must be >= 0");

  std::vector<Eigen::Index> level_cols, rain_cols;
  for (Eigen::Index j = 0; j < frame.channel_count(); ++j) {
    (frame.channels[j].kind == ChannelKind::level ? level_cols : rain_cols).push_back(j);
  }

  LagSpec spec;
  for (Eigen::Index j : level_cols) {
    const VectorXd acf = autocorrelation(train_column(frame, j, train_rows), cap);
    Eigen::Index last = 0;
    for (Eigen::Index lag = 0; lag <= cap; ++lag) {
      if (acf(lag) >= policy.acf_threshold) last = lag;
    }
    ChannelLags lags{frame.channels[j].id, {}};
    for (Eigen::Index lag = 0; lag <= last; ++lag) lags.lags.push_back(lag);
    spec.channels.push_back(std::move(lags));
  }

  if (!rain_cols.empty() && !level_cols.empty()) {
    double z = policy.significance_z;
    if (policy.bonferroni) {
      const double alpha = std::erfc(policy.significance_z / std::sqrt(2.0));
      const double tests = static_cast<double>((cap + 1) * level_cols.size());
      z = normal_quantile(1.0 - alpha / (2.0 * tests));
    }
    const double bound = z / std::sqrt(static_cast<double>(train_rows.size()));
    for (Eigen::Index j : rain_cols) {
      const VectorXd rain = train_column(frame, j, train_rows);
      if (!has_variance(rain)) continue;
      std::set<Eigen::Index> chosen;
      for (Eigen::Index s : level_cols) {
        const VectorXd ccf = cross_correlation(rain, train_column(frame, s, train_rows), cap);
        std::vector<Eigen::Index> candidates;
        for (Eigen::Index lag = 0; lag <= cap; ++lag) {
          if (std::abs(ccf(lag)) > bound) candidates.push_back(lag);
        }
        std::stable_sort(candidates.begin(), candidates.end(),
                         [&ccf](Eigen::Index x, Eigen::Index y) {
                           return std::abs(ccf(x)) > std::abs(ccf(y));
                         });
        const auto keep = std::min<std::size_t>(candidates.size(),
                                                static_cast<std::size_t>(policy.top_m));
        chosen.insert(candidates.begin(), candidates.begin() + static_cast<long>(keep));
      }
      if (!chosen.empty()) {
        spec.channels.push_back({frame.channels[j].id, {chosen.begin(), chosen.end()}});
      }
    }
  }

  if (spec.channels.empty()) throw LagSelectionError("no channel passes lag selection");
  std::sort(spec.channels.begin(), spec.channels.end(),
            [](const ChannelLags& x, const ChannelLags& y) { return x.id < y.id; });
  Eigen::Index max_lag = 0;
  for (const auto& c : spec.channels) max_lag = std::max(max_lag, c.lags.back());
  spec.lookback = policy.fixed_lookback ? *policy.fixed_lookback : max_lag + 1;
  spec.validate();
  return spec;
}

WindowedDataset WindowedDataset::slice(Eigen::Index begin, Eigen::Index end) const {
  WindowedDataset out;
  out.input_channels = input_channels;
  out.target_channels = target_channels;
  out.lookback = lookback;
  out.horizon = horizon;
  out.inputs.assign(inputs.begin() + begin, inputs.begin() + end);
  out.targets = targets.middleCols(begin, end - begin);
  out.source_index.assign(source_index.begin() + begin, source_index.begin() + end);
  return out;
}

WindowedDataset make_windows(const TimeSeriesFrame& frame, const LagSpec& lags,
                             Eigen::Index horizon,
                             const std::vector<std::string>& target_channels) {
  if (horizon < 1) throw InvalidArgument("make_windows: horizon must be >= 1");
  if (target_channels.empty()) throw InvalidArgument("make_windows: no target channels");
  lags.validate();

  WindowedDataset out;
  out.input_channels = lags.input_ids();
  out.target_channels = target_channels;
  out.lookback = lags.lookback;
  out.horizon = horizon;

  std::vector<Eigen::Index> in_cols, target_cols;
  for (const auto& id : out.input_channels) in_cols.push_back(frame.channel_index(id));
  for (const auto& id : target_channels) target_cols.push_back(frame.channel_index(id));

  const Eigen::Index n = frame.length();
  const Eigen::Index lookback = lags.lookback;
  // bad_prefix[r] = number of rows < r with a missing input value.
  std::vector<Eigen::Index> bad_prefix(static_cast<std::size_t>(n) + 1, 0);
  for (Eigen::Index r = 0; r < n; ++r) {
    bool bad = false;
    for (auto c : in_cols) bad = bad || is_missing(frame.values(r, c));
    bad_prefix[r + 1] = bad_prefix[r] + (bad ? 1 : 0);
  }

  std::vector<Eigen::Index> eligible;
  for (Eigen::Index t = lookback - 1; t + horizon < n; ++t) {
    if (bad_prefix[t + 1] - bad_prefix[t + 1 - lookback] != 0) continue;
    bool target_ok = true;
    for (auto c : target_cols) target_ok = target_ok && !is_missing(frame.values(t + horizon, c));
    if (target_ok) eligible.push_back(t);
  }
  if (eligible.empty()) {
    throw EmptyDatasetError("no eligible windows (lookback " + std::to_string(lookback) +
                            ", horizon " + std::to_string(horizon) + ", " +
                            std::to_string(n) + " rows)");
  }

  const auto count = static_cast<Eigen::Index>(eligible.size());
  out.inputs.reserve(eligible.size());
  out.targets.resize(static_cast<Eigen::Index>(target_cols.size()), count);
  for (Eigen::Index k = 0; k < count; ++k) {
    const Eigen::Index t = eligible[static_cast<std::size_t>(k)];
    MatrixXd window(lookback, static_cast<Eigen::Index>(in_cols.size()));
    for (std::size_t c = 0; c < in_cols.size(); ++c) {
      window.col(static_cast<Eigen::Index>(c)) =
          frame.values.col(in_cols[c]).segment(t - lookback + 1, lookback);
    }
    out.inputs.push_back(std::move(window));
    for (std::size_t s = 0; s < target_cols.size(); ++s) {
      out.targets(static_cast<Eigen::Index>(s), k) = frame.values(t + horizon, target_cols[s]);
    }
    out.source_index.push_back(t);
  }
  return out;
}

MatrixXd window_at(const TimeSeriesFrame& frame, const LagSpec& lags, Eigen::Index t) {
  lags.validate();
  if (t < 0 || t >= frame.length()) {
    throw InvalidArgument("window_at: row " + std::to_string(t) + " is outside the frame");
  }
  if (t < lags.lookback - 1) {
    throw HistoryError("a window ending at " + format_timestamp(frame.time_at(t)) + " needs " +
                       std::to_string(lags.lookback) + " steps of history, starting at " +
                       format_timestamp(frame.time_at(t - lags.lookback + 1)) +
                       ", before the data starts at " + format_timestamp(frame.start));
  }
  const auto ids = lags.input_ids();
  MatrixXd window(lags.lookback, static_cast<Eigen::Index>(ids.size()));
  for (std::size_t c = 0; c < ids.size(); ++c) {
    window.col(static_cast<Eigen::Index>(c)) =
        frame.values.col(frame.channel_index(ids[c])).segment(t - lags.lookback + 1, lags.lookback);
  }
  if (window.hasNaN()) {
    throw HistoryError("the " + std::to_string(lags.lookback) + "-step window ending at " +
                       format_timestamp(frame.time_at(t)) + " has missing values");
  }
  return window;
}

std::pair<WindowedDataset, WindowedDataset> chrono_split(const WindowedDataset& dataset,
                                                         double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw SplitError("train fraction must lie strictly between 0 and 1");
  }
  const Eigen::Index n = dataset.size();
  const auto n_train =
      static_cast<Eigen::Index>(std::floor(static_cast<double>(n) * train_fraction));
  if (n_train == 0 || n_train == n) {
    throw SplitError("split of " + std::to_string(n) + " samples at " +
                     format_double(train_fraction) + " leaves one side empty");
  }
  return {dataset.slice(0, n_train), dataset.slice(n_train, n)};
}

}  // namespace deepcso
