#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "latte/errors.hpp"
#include "latte/rng.hpp"
#include "latte/tensor.hpp"

namespace latte {

/// N series observed over T_total time steps; values are row-major {N, T}.
/// mask[n*T + t] == 0 marks a missing cell (its value is NaN).
struct SeriesMatrix {
  Tensor values;  // {N, T_total}
  std::vector<std::string> names;
  std::vector<std::string> time;
  std::vector<std::uint8_t> mask;

  int n() const { return values.shape.empty() ? 0 : values.shape[0]; }
  int t_total() const { return values.rank() < 2 ? 0 : values.shape[1]; }

  double at(int series, int t) const { return values.at(series, t); }
  bool observed(int series, int t) const {
    return mask[static_cast<std::size_t>(series) * t_total() + t] != 0;
  }
  bool window_observed(int t0, int t1) const {
    for (int s = 0; s < n(); ++s)
      for (int t = t0; t < t1; ++t)
        if (!observed(s, t)) return false;
    return true;
  }
};

inline SeriesMatrix make_series(Tensor values, std::vector<std::string> names) {
  SeriesMatrix m;
  if (values.rank() != 2) throw DimensionError("series values must be rank-2 {N, T}");
  if (static_cast<int>(names.size()) != values.shape[0])
    throw DimensionError("series name count does not match row count");
  m.mask.assign(values.data.size(), 1);
  for (std::size_t i = 0; i < values.data.size(); ++i)
    if (!std::isfinite(values.data[i])) m.mask[i] = 0;
  m.values = std::move(values);
  m.names = std::move(names);
  for (int t = 0; t < m.t_total(); ++t) m.time.push_back(std::to_string(t));
  return m;
}

enum class Layout { wide, long_fmt };

inline Layout layout_from_name(const std::string& s) {
  if (s == "wide") return Layout::wide;
  if (s == "long") return Layout::long_fmt;
  throw ConfigError("unknown csv layout '" + s + "' (expected wide or long)");
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.erase(f.begin());
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.pop_back();
  }
  return out;
}

inline bool is_missing_token(const std::string& s) {
  return s.empty() || s == "nan" || s == "NaN" || s == "NAN";
}

inline double parse_double(const std::string& s, int line_no) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e)
    throw ParseError("line " + std::to_string(line_no) + ": cannot parse number '" + s + "'");
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// wide: header of series names (optionally a leading "time" column), one row
/// per time step. long: (series, time, value) rows pivoted into a matrix with
/// unseen (series, time) cells masked.
inline SeriesMatrix load_csv(const std::string& path, Layout layout) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!(line.empty() && in.peek() == std::char_traits<char>::eof())) lines.push_back(line);
  if (lines.empty()) throw ParseError("'" + path + "' is empty");

  SeriesMatrix m;
  if (layout == Layout::wide) {
    auto header = detail::split_csv_line(lines[0]);
    bool has_time = !header.empty() && (header[0] == "time" || header[0] == "Time" || header[0].empty());
    const std::size_t first = has_time ? 1 : 0;
    if (header.size() <= first) throw ParseError("line 1: no series columns in header");
    for (std::size_t i = first; i < header.size(); ++i) m.names.push_back(header[i]);
    const int n = static_cast<int>(m.names.size());
    const int t_total = static_cast<int>(lines.size()) - 1;
    m.values = Tensor::full({n, t_total}, std::nan(""));
    m.mask.assign(m.values.data.size(), 0);
    for (int t = 0; t < t_total; ++t) {
      auto row = detail::split_csv_line(lines[static_cast<std::size_t>(t) + 1]);
      if (row.size() != header.size())
        throw ParseError("line " + std::to_string(t + 2) + ": expected " +
                         std::to_string(header.size()) + " fields, got " + std::to_string(row.size()));
      m.time.push_back(has_time ? row[0] : std::to_string(t));
      for (int s = 0; s < n; ++s) {
        const std::string& tok = row[first + static_cast<std::size_t>(s)];
        if (detail::is_missing_token(tok)) continue;
        m.values.at(s, t) = detail::parse_double(tok, t + 2);
        m.mask[static_cast<std::size_t>(s) * t_total + t] = 1;
      }
    }
  } else {
    auto header = detail::split_csv_line(lines[0]);
    int ci_series = -1, ci_time = -1, ci_value = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == "series") ci_series = static_cast<int>(i);
      if (header[i] == "time") ci_time = static_cast<int>(i);
      if (header[i] == "value") ci_value = static_cast<int>(i);
    }
    if (ci_series < 0 || ci_time < 0 || ci_value < 0)
      throw ParseError("line 1: long layout needs series,time,value columns");
    std::map<std::string, int> series_idx;
    std::map<std::string, int> time_idx;
    std::vector<std::string> times;
    struct Cell { int s, t; double v; int line; };
    std::vector<Cell> cells;
    std::map<std::pair<int, int>, int> seen;
    for (std::size_t li = 1; li < lines.size(); ++li) {
      auto row = detail::split_csv_line(lines[li]);
      if (row.size() != header.size())
        throw ParseError("line " + std::to_string(li + 1) + ": expected " +
                         std::to_string(header.size()) + " fields, got " + std::to_string(row.size()));
      const std::string& sname = row[static_cast<std::size_t>(ci_series)];
      const std::string& tname = row[static_cast<std::size_t>(ci_time)];
      int s;
      if (auto it = series_idx.find(sname); it != series_idx.end()) {
        s = it->second;
      } else {
        s = static_cast<int>(m.names.size());
        series_idx.emplace(sname, s);
        m.names.push_back(sname);
      }
      int t;
      if (auto it = time_idx.find(tname); it != time_idx.end()) {
        t = it->second;
      } else {
        t = static_cast<int>(times.size());
        time_idx.emplace(tname, t);
        times.push_back(tname);
      }
      if (auto it = seen.find({s, t}); it != seen.end())
        throw ParseError("line " + std::to_string(li + 1) + ": duplicate (series,time) = (" + sname +
                         "," + tname + "), first seen on line " + std::to_string(it->second));
      seen.emplace(std::make_pair(s, t), static_cast<int>(li + 1));
      const std::string& tok = row[static_cast<std::size_t>(ci_value)];
      if (!detail::is_missing_token(tok))
        cells.push_back({s, t, detail::parse_double(tok, static_cast<int>(li + 1)), static_cast<int>(li + 1)});
    }
    const int n = static_cast<int>(m.names.size());
    const int t_total = static_cast<int>(times.size());
    if (n == 0 || t_total == 0) throw ParseError("long file has no data rows");
    m.values = Tensor::full({n, t_total}, std::nan(""));
    m.mask.assign(m.values.data.size(), 0);
    m.time = times;
    for (const auto& c : cells) {
      m.values.at(c.s, c.t) = c.v;
      m.mask[static_cast<std::size_t>(c.s) * t_total + c.t] = 1;
    }
  }
  return m;
}

inline void write_csv(const SeriesMatrix& m, std::ostream& out, Layout layout = Layout::wide) {
  if (layout == Layout::wide) {
    out << "time";
    for (const auto& name : m.names) out << "," << name;
    out << "\n";
    for (int t = 0; t < m.t_total(); ++t) {
      out << m.time[static_cast<std::size_t>(t)];
      for (int s = 0; s < m.n(); ++s) {
        out << ",";
        if (m.observed(s, t)) out << detail::format_double(m.at(s, t));
      }
      out << "\n";
    }
  } else {
    out << "series,time,value\n";
    for (int s = 0; s < m.n(); ++s)
      for (int t = 0; t < m.t_total(); ++t)
        if (m.observed(s, t))
          out << m.names[static_cast<std::size_t>(s)] << "," << m.time[static_cast<std::size_t>(t)]
              << "," << detail::format_double(m.at(s, t)) << "\n";
  }
}

inline void write_csv(const SeriesMatrix& m, const std::string& path, Layout layout = Layout::wide) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(m, out, layout);
}

// --- scaling -----------------------------------------------------------------

/// Per-series affine statistics fit on the training range only. Kinds:
/// "standard" ((x-mean)/std), "meanabs" (x / mean|x|), "none".
struct ScalerState {
  std::string kind = "standard";
  int train_end = 0;
  std::vector<double> offset;
  std::vector<double> scale;
  std::vector<std::string> warnings;
};

inline ScalerState fit_scaler(const SeriesMatrix& m, const std::string& kind, int train_end) {
  if (train_end < 2) throw ContractError("fit_scaler: train_end must be >= 2");
  if (train_end > m.t_total()) throw ContractError("fit_scaler: train_end exceeds series length");
  if (kind != "standard" && kind != "meanabs" && kind != "none")
    throw ConfigError("unknown scaler kind '" + kind + "'");
  ScalerState st;
  st.kind = kind;
  st.train_end = train_end;
  st.offset.assign(static_cast<std::size_t>(m.n()), 0.0);
  st.scale.assign(static_cast<std::size_t>(m.n()), 1.0);
  if (kind == "none") return st;
  for (int s = 0; s < m.n(); ++s) {
    double sum = 0.0, sum_sq = 0.0, sum_abs = 0.0;
    long long cnt = 0;
    for (int t = 0; t < train_end; ++t) {
      if (!m.observed(s, t)) continue;
      const double v = m.at(s, t);
      sum += v;
      sum_sq += v * v;
      sum_abs += std::abs(v);
      ++cnt;
    }
    if (cnt == 0) {
      st.warnings.push_back("series '" + m.names[static_cast<std::size_t>(s)] +
                            "' has no observed training values; left unscaled");
      continue;
    }
    if (kind == "standard") {
      const double mean = sum / static_cast<double>(cnt);
      const double var = sum_sq / static_cast<double>(cnt) - mean * mean;
      double sd = var > 0.0 ? std::sqrt(var) : 0.0;
      if (sd < 1e-12) {
        sd = 1.0;
        st.warnings.push_back("series '" + m.names[static_cast<std::size_t>(s)] +
                              "' is constant on the training range; std set to 1");
      }
      st.offset[static_cast<std::size_t>(s)] = mean;
      st.scale[static_cast<std::size_t>(s)] = sd;
    } else {  // meanabs
      double sc = sum_abs / static_cast<double>(cnt);
      if (sc < 1e-12) {
        sc = 1.0;
        st.warnings.push_back("series '" + m.names[static_cast<std::size_t>(s)] +
                              "' has near-zero mean absolute value; scale set to 1");
      }
      st.scale[static_cast<std::size_t>(s)] = sc;
    }
  }
  return st;
}

inline SeriesMatrix scaler_apply(const ScalerState& st, const SeriesMatrix& m) {
  if (static_cast<int>(st.scale.size()) != m.n())
    throw DimensionError("scaler fit on " + std::to_string(st.scale.size()) + " series, got " +
                         std::to_string(m.n()));
  SeriesMatrix out = m;
  for (int s = 0; s < m.n(); ++s)
    for (int t = 0; t < m.t_total(); ++t)
      if (m.observed(s, t))
        out.values.at(s, t) = (m.at(s, t) - st.offset[static_cast<std::size_t>(s)]) /
                              st.scale[static_cast<std::size_t>(s)];
  return out;
}

/// Scale a block whose final axis indexes series ({T,N}, {S,tau,N}, ...).
inline Tensor scaler_apply_block(const ScalerState& st, const Tensor& block) {
  const int n = block.last_dim();
  if (n != static_cast<int>(st.scale.size()))
    throw DimensionError("scaler_apply_block: last dim " + std::to_string(n) + " vs " +
                         std::to_string(st.scale.size()) + " series");
  Tensor out = block.detached();
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const std::size_t s = i % static_cast<std::size_t>(n);
    out.data[i] = (out.data[i] - st.offset[s]) / st.scale[s];
  }
  return out;
}

inline Tensor scaler_invert_block(const ScalerState& st, const Tensor& block) {
  const int n = block.last_dim();
  if (n != static_cast<int>(st.scale.size()))
    throw DimensionError("scaler_invert_block: last dim " + std::to_string(n) + " vs " +
                         std::to_string(st.scale.size()) + " series");
  Tensor out = block.detached();
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const std::size_t s = i % static_cast<std::size_t>(n);
    out.data[i] = out.data[i] * st.scale[s] + st.offset[s];
  }
  return out;
}

/// Time-major copy of columns [t0, t1): shape {t1-t0, N}, NaN where masked.
inline Tensor time_block(const SeriesMatrix& m, int t0, int t1) {
  if (t0 < 0 || t1 < t0 || t1 > m.t_total())
    throw DimensionError("time_block: [" + std::to_string(t0) + ", " + std::to_string(t1) +
                         ") out of range for " + std::to_string(m.t_total()) + " steps");
  Tensor out = Tensor::zeros({t1 - t0, m.n()});
  for (int t = t0; t < t1; ++t)
    for (int s = 0; s < m.n(); ++s)
      out.at(t - t0, s) = m.observed(s, t) ? m.at(s, t) : std::nan("");
  return out;
}

// --- training windows and rolling splits --------------------------------------

/// A batch of (context, horizon) pairs cut from one source series. Both blocks
/// are time-contiguous slices: target rows follow context rows immediately.
struct WindowBatch {
  Tensor context;  // {B, T, N}
  Tensor target;   // {B, tau, N}
  std::vector<int> start_offsets;
  std::string source;

  int batch() const { return context.shape[0]; }
  int context_len() const { return context.shape[1]; }
  int horizon() const { return target.shape[1]; }
  int n_series() const { return context.shape[2]; }

  /// Step t of every window as a plain {B, N} matrix; t counts from the start
  /// of the context through the end of the horizon.
  Tensor step(int t) const {
    const int T = context_len(), tau = horizon(), n = n_series(), b = batch();
    if (t < 0 || t >= T + tau) throw DimensionError("WindowBatch::step: index out of range");
    Tensor out = Tensor::zeros({b, n});
    const Tensor& src = t < T ? context : target;
    const int tt = t < T ? t : t - T;
    const int span = t < T ? T : tau;
    for (int w = 0; w < b; ++w)
      for (int s = 0; s < n; ++s)
        out.at(w, s) = src.data[static_cast<std::size_t>((w * span + tt) * n + s)];
    return out;
  }
};

/// Uniformly random (T+tau)-windows ending at or before train_end. Windows
/// touching masked cells are resampled (bounded retries).
inline WindowBatch sample_training_windows(const SeriesMatrix& m, int T, int tau, int batch,
                                           int train_end, SeededRng& rng) {
  if (T < 1 || tau < 1 || batch < 1) throw ContractError("sample_training_windows: T, tau, batch must be positive");
  const int span = T + tau;
  if (train_end > m.t_total()) throw ContractError("sample_training_windows: train_end exceeds series length");
  const int max_start = train_end - span;
  if (max_start < 0)
    throw ContractError("sample_training_windows: training range " + std::to_string(train_end) +
                        " is shorter than one window (" + std::to_string(span) + ")");
  WindowBatch wb;
  wb.context = Tensor::zeros({batch, T, m.n()});
  wb.target = Tensor::zeros({batch, tau, m.n()});
  wb.source = "series";
  const long long attempt_budget = static_cast<long long>(batch) * 1000;
  long long attempts = 0;
  for (int w = 0; w < batch; ++w) {
    int start = -1;
    while (true) {
      if (attempts++ >= attempt_budget)
        throw ContractError("sample_training_windows: no complete window found after " +
                            std::to_string(attempts - 1) + " attempts (too many missing values)");
      const int cand = rng.uniform_int(max_start + 1);
      if (m.window_observed(cand, cand + span)) {
        start = cand;
        break;
      }
    }
    wb.start_offsets.push_back(start);
    for (int t = 0; t < span; ++t)
      for (int s = 0; s < m.n(); ++s) {
        const double v = m.at(s, start + t);
        if (t < T)
          wb.context.data[static_cast<std::size_t>((w * T + t) * m.n() + s)] = v;
        else
          wb.target.data[static_cast<std::size_t>((w * tau + (t - T)) * m.n() + s)] = v;
      }
  }
  return wb;
}

struct TestWindow {
  int context_start = 0;
  int context_end = 0;  // == horizon start
  int horizon_end = 0;
};

/// W equally spaced, non-overlapping horizon windows tiled backward from the
/// series end; training ends where the earliest test horizon starts.
struct SplitPlan {
  int train_end = 0;
  int context_len = 0;
  int horizon = 0;
  std::vector<TestWindow> windows;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["train_end"] = train_end;
    j["context"] = context_len;
    j["horizon"] = horizon;
    j["windows"] = nlohmann::json::array();
    for (const auto& w : windows)
      j["windows"].push_back({{"context_start", w.context_start},
                              {"context_end", w.context_end},
                              {"horizon_end", w.horizon_end}});
    return j;
  }

  static SplitPlan from_json(const nlohmann::json& j) {
    SplitPlan p;
    p.train_end = j.at("train_end").get<int>();
    p.context_len = j.at("context").get<int>();
    p.horizon = j.at("horizon").get<int>();
    for (const auto& w : j.at("windows"))
      p.windows.push_back({w.at("context_start").get<int>(), w.at("context_end").get<int>(),
                           w.at("horizon_end").get<int>()});
    return p;
  }
};

inline SplitPlan rolling_splits(const SeriesMatrix& m, int W, int tau, int T) {
  if (W < 1 || tau < 1 || T < 1) throw ContractError("rolling_splits: W, tau, T must be positive");
  const int needed = T + W * tau;
  if (m.t_total() < needed)
    throw ContractError("rolling_splits: series has " + std::to_string(m.t_total()) +
                        " steps, needs at least " + std::to_string(needed) + " (T + W*tau)");
  SplitPlan plan;
  plan.context_len = T;
  plan.horizon = tau;
  plan.train_end = m.t_total() - W * tau;
  for (int w = 0; w < W; ++w) {
    const int hor_start = plan.train_end + w * tau;
    plan.windows.push_back({hor_start - T, hor_start, hor_start + tau});
  }
  return plan;
}

// --- synthetic generators ------------------------------------------------------

/// Ground-truth parameters of the latent VAR generator, plus the simulated
/// latent path, so the analytically optimal forecast is computable:
///   x_t = A x_{t-1} + eps,  eps ~ N(0, sigma_latent^2 I)
///   y_t = W x_t + b + eta,  eta ~ N(0, sigma_obs^2 I)
struct VarOracle {
  Tensor A;  // {D, D}
  Tensor W;  // {N, D}
  std::vector<double> b;
  double sigma_latent = 0.0;
  double sigma_obs = 0.0;
  Tensor latents;  // {T_total, D}

  int latent_dim() const { return A.shape[0]; }
  int obs_dim() const { return W.shape[0]; }

  /// E[y_{t+k} | x_t].
  std::vector<double> mean_k(const std::vector<double>& x_t, int k) const {
    const int d = latent_dim();
    std::vector<double> x = x_t;
    for (int step = 0; step < k; ++step) {
      std::vector<double> nx(static_cast<std::size_t>(d), 0.0);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) nx[static_cast<std::size_t>(i)] += A.at(i, j) * x[static_cast<std::size_t>(j)];
      x = std::move(nx);
    }
    std::vector<double> y(static_cast<std::size_t>(obs_dim()), 0.0);
    for (int n = 0; n < obs_dim(); ++n) {
      double v = b[static_cast<std::size_t>(n)];
      for (int j = 0; j < d; ++j) v += W.at(n, j) * x[static_cast<std::size_t>(j)];
      y[static_cast<std::size_t>(n)] = v;
    }
    return y;
  }

  /// Per-coordinate Var[y_{t+k} | x_t] (diagonal of the predictive covariance).
  std::vector<double> var_k(int k) const {
    const int d = latent_dim();
    // P_k = sum_{j=0}^{k-1} A^j (sigma^2 I) (A^j)^T via P <- A P A^T + sigma^2 I.
    std::vector<double> P(static_cast<std::size_t>(d) * d, 0.0);
    for (int step = 0; step < k; ++step) {
      std::vector<double> AP(static_cast<std::size_t>(d) * d, 0.0);
      for (int i = 0; i < d; ++i)
        for (int l = 0; l < d; ++l) {
          double s = 0.0;
          for (int j = 0; j < d; ++j) s += A.at(i, j) * P[static_cast<std::size_t>(j) * d + l];
          AP[static_cast<std::size_t>(i) * d + l] = s;
        }
      std::vector<double> next(static_cast<std::size_t>(d) * d, 0.0);
      for (int i = 0; i < d; ++i)
        for (int l = 0; l < d; ++l) {
          double s = 0.0;
          for (int j = 0; j < d; ++j) s += AP[static_cast<std::size_t>(i) * d + j] * A.at(l, j);
          next[static_cast<std::size_t>(i) * d + l] = s;
        }
      for (int i = 0; i < d; ++i) next[static_cast<std::size_t>(i) * d + i] += sigma_latent * sigma_latent;
      P = std::move(next);
    }
    std::vector<double> out(static_cast<std::size_t>(obs_dim()), 0.0);
    for (int n = 0; n < obs_dim(); ++n) {
      double v = sigma_obs * sigma_obs;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          v += W.at(n, i) * P[static_cast<std::size_t>(i) * d + j] * W.at(n, j);
      out[static_cast<std::size_t>(n)] = v;
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["latent_dim"] = latent_dim();
    j["obs_dim"] = obs_dim();
    j["A"] = A.data;
    j["W"] = W.data;
    j["b"] = b;
    j["sigma_latent"] = sigma_latent;
    j["sigma_obs"] = sigma_obs;
    j["latents"] = latents.data;
    return j;
  }
};

/// Simulate the oracle's process for T_total steps (after a 100-step burn-in).
inline SeriesMatrix simulate_latent_var(VarOracle& oracle, int t_total, SeededRng& rng) {
  const int d = oracle.latent_dim();
  const int n = oracle.obs_dim();
  std::vector<double> x(static_cast<std::size_t>(d), 0.0);
  auto advance = [&](std::vector<double>& state) {
    std::vector<double> nx(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < d; ++i) {
      double v = 0.0;
      for (int j = 0; j < d; ++j) v += oracle.A.at(i, j) * state[static_cast<std::size_t>(j)];
      nx[static_cast<std::size_t>(i)] = v + oracle.sigma_latent * rng.normal();
    }
    state = std::move(nx);
  };
  for (int t = 0; t < 100; ++t) advance(x);
  Tensor values = Tensor::zeros({n, t_total});
  oracle.latents = Tensor::zeros({t_total, d});
  for (int t = 0; t < t_total; ++t) {
    advance(x);
    for (int i = 0; i < d; ++i) oracle.latents.at(t, i) = x[static_cast<std::size_t>(i)];
    for (int s = 0; s < n; ++s) {
      double v = oracle.b[static_cast<std::size_t>(s)];
      for (int j = 0; j < d; ++j) v += oracle.W.at(s, j) * x[static_cast<std::size_t>(j)];
      values.at(s, t) = v + oracle.sigma_obs * rng.normal();
    }
  }
  std::vector<std::string> names;
  for (int s = 0; s < n; ++s) names.push_back("s" + std::to_string(s));
  return make_series(std::move(values), std::move(names));
}

/// Random stable VAR: A is a product of Givens rotations scaled by 0.7, so its
/// spectral radius is exactly 0.7; W is a random N x D read-out.
inline std::pair<SeriesMatrix, VarOracle> gen_synthetic_latent_var(int n, int d, int t_total,
                                                                   std::uint64_t seed) {
  if (d < 1 || n <= d) throw ContractError("gen_synthetic_latent_var: need 1 <= D < N");
  if (t_total < 2) throw ContractError("gen_synthetic_latent_var: need t_total >= 2");
  SeededRng rng(seed);
  VarOracle oracle;
  oracle.A = Tensor::zeros({d, d});
  for (int i = 0; i < d; ++i) oracle.A.at(i, i) = 1.0;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const double theta = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
      const double c = std::cos(theta), s = std::sin(theta);
      for (int r = 0; r < d; ++r) {
        const double vi = oracle.A.at(r, i), vj = oracle.A.at(r, j);
        oracle.A.at(r, i) = c * vi - s * vj;
        oracle.A.at(r, j) = s * vi + c * vj;
      }
    }
  for (auto& v : oracle.A.data) v *= 0.7;
  oracle.W = Tensor::zeros({n, d});
  for (auto& v : oracle.W.data) v = rng.normal() / std::sqrt(static_cast<double>(d));
  oracle.b.resize(static_cast<std::size_t>(n));
  for (auto& v : oracle.b) v = rng.normal();
  oracle.sigma_latent = 0.5;
  oracle.sigma_obs = 0.02;
  SeriesMatrix m = simulate_latent_var(oracle, t_total, rng);
  return {std::move(m), std::move(oracle)};
}

/// Each series is a random-phase sum of two sinusoids (the second at half the
/// period of the first) plus Gaussian noise.
inline SeriesMatrix gen_sine_mixture(int n, int t_total, std::uint64_t seed, double noise = 0.05) {
  if (n < 1 || t_total < 1) throw ContractError("gen_sine_mixture: need N >= 1 and t_total >= 1");
  SeededRng rng(seed);
  Tensor values = Tensor::zeros({n, t_total});
  const double two_pi = 2.0 * 3.14159265358979323846;
  for (int s = 0; s < n; ++s) {
    const double p1 = static_cast<double>(12 + rng.uniform_int(21));  // integer period in [12, 32]
    const double p2 = p1 / 2.0;
    const double a1 = rng.uniform(1.0, 2.0);
    const double a2 = rng.uniform(0.3, 0.8);
    const double ph1 = rng.uniform(0.0, two_pi);
    const double ph2 = rng.uniform(0.0, two_pi);
    for (int t = 0; t < t_total; ++t)
      values.at(s, t) = a1 * std::sin(two_pi * t / p1 + ph1) + a2 * std::sin(two_pi * t / p2 + ph2) +
                        (noise > 0.0 ? noise * rng.normal() : 0.0);
  }
  std::vector<std::string> names;
  for (int s = 0; s < n; ++s) names.push_back("s" + std::to_string(s));
  return make_series(std::move(values), std::move(names));
}

/// Latent VAR whose latent mean jumps between two well-separated regimes at
/// T_total/2. Returns the series and the switch index.
inline std::pair<SeriesMatrix, int> gen_two_regime(int n, int t_total, std::uint64_t seed) {
  if (n < 3 || t_total < 8) throw ContractError("gen_two_regime: need N >= 3 and t_total >= 8");
  SeededRng rng(seed);
  const int d = 2;
  const double theta = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const double rot[4] = {std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta)};
  double A[4];
  for (int i = 0; i < 4; ++i) A[i] = 0.6 * rot[i];
  const double ang = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const double u[2] = {std::cos(ang), std::sin(ang)};
  const double sep = 2.5, sigma = 0.4, obs_noise = 0.05;
  Tensor wmat = Tensor::zeros({n, d});
  for (auto& v : wmat.data) v = rng.normal();
  std::vector<double> bias(static_cast<std::size_t>(n));
  for (auto& v : bias) v = rng.normal() * 0.3;
  const int switch_t = t_total / 2;
  Tensor values = Tensor::zeros({n, t_total});
  double x[2] = {sep * u[0], sep * u[1]};
  for (int t = -100; t < t_total; ++t) {
    const double sgn = (t >= 0 && t >= switch_t) ? -1.0 : 1.0;
    const double mu[2] = {sgn * sep * u[0], sgn * sep * u[1]};
    const double cx = x[0] - mu[0], cy = x[1] - mu[1];
    x[0] = mu[0] + A[0] * cx + A[1] * cy + sigma * rng.normal();
    x[1] = mu[1] + A[2] * cx + A[3] * cy + sigma * rng.normal();
    if (t < 0) continue;
    for (int s = 0; s < n; ++s)
      values.at(s, t) = wmat.at(s, 0) * x[0] + wmat.at(s, 1) * x[1] + bias[static_cast<std::size_t>(s)] +
                        obs_noise * rng.normal();
  }
  std::vector<std::string> names;
  for (int s = 0; s < n; ++s) names.push_back("s" + std::to_string(s));
  return {make_series(std::move(values), std::move(names)), switch_t};
}

}  // namespace latte
