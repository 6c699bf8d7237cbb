#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "latte/data.hpp"
#include "latte/flow.hpp"
#include "latte/metrics.hpp"
#include "latte/nn.hpp"
#include "latte/rng.hpp"
#include "latte/tape.hpp"

namespace latte {

namespace detail {

inline void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string("bad value for '") + key + "'");
    }
  }
}

}  // namespace detail

/// Everything needed to rebuild the model and its training run. Defaults are
/// materialized, so the serialized form alone reproduces a run.
struct ModelConfig {
  int n_series = 1;
  int latent_dim = 2;
  int hidden_dim = 40;
  int context_len = 24;
  int horizon = 12;
  double lambda = 1.0;
  FlowKind flow = FlowKind::realnvp;
  int flow_layers = 4;
  int coupling_hidden = 0;  // 0 -> max(16, 4*latent_dim)
  std::vector<int> encoder_hidden;  // empty -> {max(32, 2N), max(32, 2N)}
  std::vector<int> decoder_hidden;
  Cell cell = Cell::gru;
  int rnn_layers = 1;
  double scale_clamp = 5.0;
  AdamConfig adam;
  double grad_clip = 10.0;
  int batch_size = 32;
  int epochs = 200;
  int batches_per_epoch = 0;  // 0 -> auto from the training span
  std::string scaler = "standard";
  std::uint64_t seed = 42;
  bool allow_latent_ge_n = false;

  int coupling_width() const {
    return coupling_hidden > 0 ? coupling_hidden : std::max(16, 4 * latent_dim);
  }
  std::vector<int> encoder_dims() const {
    std::vector<int> dims{n_series};
    if (encoder_hidden.empty()) {
      const int w = std::max(32, 2 * n_series);
      dims.push_back(w);
      dims.push_back(w);
    } else {
      dims.insert(dims.end(), encoder_hidden.begin(), encoder_hidden.end());
    }
    dims.push_back(latent_dim);
    return dims;
  }
  std::vector<int> decoder_dims() const {
    std::vector<int> dims{latent_dim};
    if (decoder_hidden.empty()) {
      const int w = std::max(32, 2 * n_series);
      dims.push_back(w);
      dims.push_back(w);
    } else {
      dims.insert(dims.end(), decoder_hidden.begin(), decoder_hidden.end());
    }
    dims.push_back(n_series);
    return dims;
  }

  void validate() const {
    if (n_series < 1) throw ConfigError("n_series must be >= 1");
    if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
    if (latent_dim >= n_series && !allow_latent_ge_n)
      throw ConfigError("latent_dim must be < n_series (set allow_latent_ge_n to override)");
    if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
    if (context_len < 2) throw ConfigError("context_len must be >= 2");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (flow_layers < 1) throw ConfigError("flow_layers must be >= 1");
    if (flow == FlowKind::realnvp && latent_dim < 2)
      throw ConfigError("realnvp needs latent_dim >= 2; use flow = maf for latent_dim 1");
    if (rnn_layers < 1) throw ConfigError("rnn_layers must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batches_per_epoch < 0) throw ConfigError("batches_per_epoch must be >= 0");
    if (!(adam.lr > 0.0)) throw ConfigError("lr must be > 0");
    if (scaler != "standard" && scaler != "meanabs" && scaler != "none")
      throw ConfigError("scaler must be standard, meanabs or none");
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["n_series"] = n_series;
    j["latent_dim"] = latent_dim;
    j["hidden_dim"] = hidden_dim;
    j["context_len"] = context_len;
    j["horizon"] = horizon;
    j["lambda"] = lambda;
    j["flow"] = flow_name(flow);
    j["flow_layers"] = flow_layers;
    j["coupling_hidden"] = coupling_hidden;
    j["encoder_hidden"] = encoder_hidden;
    j["decoder_hidden"] = decoder_hidden;
    j["cell"] = cell_name(cell);
    j["rnn_layers"] = rnn_layers;
    j["scale_clamp"] = scale_clamp;
    j["lr"] = adam.lr;
    j["beta1"] = adam.beta1;
    j["beta2"] = adam.beta2;
    j["eps"] = adam.eps;
    j["grad_clip"] = grad_clip;
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["batches_per_epoch"] = batches_per_epoch;
    j["scaler"] = scaler;
    j["seed"] = seed;
    j["allow_latent_ge_n"] = allow_latent_ge_n;
    return j;
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    detail::require_keys(j, {"n_series", "latent_dim", "hidden_dim", "context_len", "horizon",
                             "lambda", "flow", "flow_layers", "coupling_hidden", "encoder_hidden",
                             "decoder_hidden", "cell", "rnn_layers", "scale_clamp", "lr", "beta1",
                             "beta2", "eps", "grad_clip", "batch_size", "epochs",
                             "batches_per_epoch", "scaler", "seed", "allow_latent_ge_n"},
                         "model config");
    ModelConfig c;
    detail::read_field(j, "n_series", c.n_series);
    detail::read_field(j, "latent_dim", c.latent_dim);
    detail::read_field(j, "hidden_dim", c.hidden_dim);
    detail::read_field(j, "context_len", c.context_len);
    detail::read_field(j, "horizon", c.horizon);
    detail::read_field(j, "lambda", c.lambda);
    if (j.count("flow")) c.flow = flow_from_name(j.at("flow").get<std::string>());
    detail::read_field(j, "flow_layers", c.flow_layers);
    detail::read_field(j, "coupling_hidden", c.coupling_hidden);
    detail::read_field(j, "encoder_hidden", c.encoder_hidden);
    detail::read_field(j, "decoder_hidden", c.decoder_hidden);
    if (j.count("cell")) c.cell = cell_from_name(j.at("cell").get<std::string>());
    detail::read_field(j, "rnn_layers", c.rnn_layers);
    detail::read_field(j, "scale_clamp", c.scale_clamp);
    detail::read_field(j, "lr", c.adam.lr);
    detail::read_field(j, "beta1", c.adam.beta1);
    detail::read_field(j, "beta2", c.adam.beta2);
    detail::read_field(j, "eps", c.adam.eps);
    detail::read_field(j, "grad_clip", c.grad_clip);
    detail::read_field(j, "batch_size", c.batch_size);
    detail::read_field(j, "epochs", c.epochs);
    detail::read_field(j, "batches_per_epoch", c.batches_per_epoch);
    detail::read_field(j, "scaler", c.scaler);
    detail::read_field(j, "seed", c.seed);
    detail::read_field(j, "allow_latent_ge_n", c.allow_latent_ge_n);
    // semantic validation happens at use (make_model / cmd_train, after the
    // CLI has had a chance to fill n_series from the dataset)
    return c;
  }
};

/// Encoder/decoder, recurrent conditioner and conditional flow, trained
/// jointly. The learned start token feeds the conditioner at t=1 so the
/// hidden state only ever summarizes strictly past latents.
struct LatteModel {
  ModelConfig cfg;
  MlpParams encoder;
  MlpParams decoder;
  RnnParams rnn;
  FlowStack flow;
  Parameter start_token;  // {1, D}
  ScalerState scaler;
  long long train_steps = 0;

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    mlp_collect(encoder, out);
    mlp_collect(decoder, out);
    rnn_collect(rnn, out);
    flow_collect(flow, out);
    out.push_back(&start_token);
    return out;
  }
};

inline LatteModel make_model(const ModelConfig& cfg) {
  cfg.validate();
  LatteModel m;
  m.cfg = cfg;
  SeededRng rng(cfg.seed);
  m.encoder = mlp_init("encoder", cfg.encoder_dims(), Act::tanh, Act::identity, rng);
  m.decoder = mlp_init("decoder", cfg.decoder_dims(), Act::tanh, Act::identity, rng);
  m.rnn = rnn_init("rnn", cfg.cell, cfg.latent_dim, cfg.hidden_dim, cfg.rnn_layers, rng);
  m.flow = flow_init("flow", cfg.flow, cfg.latent_dim, cfg.hidden_dim, cfg.flow_layers,
                     cfg.coupling_width(), cfg.scale_clamp, rng);
  m.start_token = {"start.token", Tensor::zeros({1, cfg.latent_dim})};
  m.scaler.kind = cfg.scaler;
  m.scaler.offset.assign(static_cast<std::size_t>(cfg.n_series), 0.0);
  m.scaler.scale.assign(static_cast<std::size_t>(cfg.n_series), 1.0);
  return m;
}

inline Tensor encode(Tape& tp, LatteModel& m, const Tensor& y) {
  if (y.rank() != 2 || y.shape[1] != m.cfg.n_series)
    throw DimensionError("encode: input shape " + shape_to_string(y.shape) + " does not match N=" +
                         std::to_string(m.cfg.n_series));
  return mlp_forward(tp, m.encoder, y);
}

inline Tensor decode(Tape& tp, LatteModel& m, const Tensor& x) {
  if (x.rank() != 2 || x.shape[1] != m.cfg.latent_dim)
    throw DimensionError("decode: input shape " + shape_to_string(x.shape) + " does not match D=" +
                         std::to_string(m.cfg.latent_dim));
  return mlp_forward(tp, m.decoder, x);
}

namespace detail {

inline Tensor broadcast_rows(Tape& tp, const Tensor& row, int batch) {
  // ones(batch,1) @ row(1,D) replicates the row differentiably.
  return tp.matmul(tp.input(Tensor::full({batch, 1}, 1.0)), row);
}

/// States h_1..h_{n_states}, where h_1 is the cell's update of the zero state
/// with the learned start token and h_k consumes x_{k-1}. With n_states ==
/// len(x)+1 every input is consumed; with n_states == len(x) the final input
/// is never read. h_k therefore depends on x_1..x_{k-1} only.
inline std::vector<HiddenState> unroll_hidden(Tape& tp, LatteModel& m,
                                              const std::vector<Tensor>& x_steps, int n_states) {
  if (n_states < 1) throw ContractError("unroll: need at least one state");
  if (n_states > static_cast<int>(x_steps.size()) + 1)
    throw ContractError("unroll: not enough inputs for " + std::to_string(n_states) + " states");
  const int batch = n_states > 1 || !x_steps.empty() ? (x_steps.empty() ? 1 : x_steps[0].shape[0]) : 1;
  std::vector<HiddenState> states;
  HiddenState st = rnn_zero_state(tp, m.rnn, batch);
  Tensor start = broadcast_rows(tp, tp.param(m.start_token), batch);
  st = rnn_step(tp, m.rnn, start, st);
  states.push_back(st);
  for (int k = 1; k < n_states; ++k) {
    st = rnn_step(tp, m.rnn, x_steps[static_cast<std::size_t>(k - 1)], st);
    states.push_back(st);
  }
  return states;
}

}  // namespace detail

/// Conditioner states for a latent path {B, L, D}: returns {B, L, H} where
/// row t is h_t and depends only on x_1..x_{t-1} (never on x_t itself).
inline Tensor unroll_states(Tape& tp, LatteModel& m, const Tensor& x_path) {
  if (x_path.rank() != 3 || x_path.shape[2] != m.cfg.latent_dim)
    throw DimensionError("unroll_states: path shape " + shape_to_string(x_path.shape) +
                         " does not match {B, L, D}");
  const int b = x_path.shape[0], len = x_path.shape[1], d = x_path.shape[2];
  if (len < 1) throw ContractError("unroll_states: need L >= 1");
  std::vector<Tensor> steps;
  for (int t = 0; t < len; ++t) {
    Tensor st = Tensor::zeros({b, d});
    for (int w = 0; w < b; ++w)
      for (int j = 0; j < d; ++j)
        st.at(w, j) = x_path.data[static_cast<std::size_t>((w * len + t) * d + j)];
    steps.push_back(tp.input(st));
  }
  auto states = detail::unroll_hidden(tp, m, steps, len);
  Tensor out = Tensor::zeros({b, len, m.cfg.hidden_dim});
  for (int t = 0; t < len; ++t) {
    const Tensor& h = states[static_cast<std::size_t>(t)].h.back();
    for (int w = 0; w < b; ++w)
      for (int j = 0; j < m.cfg.hidden_dim; ++j)
        out.data[static_cast<std::size_t>((w * len + t) * m.cfg.hidden_dim + j)] = h.at(w, j);
  }
  return out;
}

/// Mean squared reconstruction error over every window, step and series:
/// sum over context and horizon of ||y_t - decode(encode(y_t))||^2, divided
/// by batch * (T + tau).
inline Tensor loss_reconstruction(Tape& tp, LatteModel& m, const WindowBatch& batch) {
  const int span = batch.context_len() + batch.horizon();
  const int b = batch.batch(), n = batch.n_series();
  Tensor rows = Tensor::zeros({b * span, n});
  for (int t = 0; t < span; ++t) {
    Tensor st = batch.step(t);
    for (int w = 0; w < b; ++w)
      for (int s = 0; s < n; ++s)
        rows.at(w * span + t, s) = st.at(w, s);
  }
  Tensor y = tp.input(rows);
  Tensor recon = decode(tp, m, encode(tp, m, y));
  Tensor total = tp.reduce_sum(tp.square(tp.sub(y, recon)));
  return tp.scale(total, 1.0 / (static_cast<double>(b) * static_cast<double>(span)));
}

/// Teacher-forced negative log-likelihood of the encoded window under the
/// conditional flow: the full window is encoded, the conditioner is unrolled
/// causally, and -log p(x_t | h_t) is averaged over t = 2..T+tau and the
/// batch. Returned as a quantity to minimize.
inline Tensor loss_negll(Tape& tp, LatteModel& m, const WindowBatch& batch) {
  const int span = batch.context_len() + batch.horizon();
  if (span < 2) throw ContractError("loss_negll: window must have at least 2 steps");
  const int b = batch.batch();
  std::vector<Tensor> lat;
  for (int t = 0; t < span; ++t) lat.push_back(encode(tp, m, tp.input(batch.step(t))));
  auto states = detail::unroll_hidden(tp, m, lat, span);
  Tensor acc;
  for (int t = 1; t < span; ++t) {
    Tensor lp = flow_log_prob(tp, m.flow, lat[static_cast<std::size_t>(t)],
                              states[static_cast<std::size_t>(t)].h.back());
    Tensor s = tp.reduce_sum(lp);
    acc = t == 1 ? s : tp.add(acc, s);
  }
  return tp.scale(acc, -1.0 / (static_cast<double>(b) * static_cast<double>(span - 1)));
}

struct LossBreakdown {
  Tensor combined;
  Tensor reconstruction;
  Tensor negll;
};

/// reconstruction + lambda * negll on one tape, so the likelihood term's
/// gradient reaches the encoder as well.
inline LossBreakdown loss_combined(Tape& tp, LatteModel& m, const WindowBatch& batch,
                                   double lambda) {
  if (lambda < 0.0) throw ContractError("loss_combined: lambda must be >= 0");
  LossBreakdown out;
  out.reconstruction = loss_reconstruction(tp, m, batch);
  out.negll = loss_negll(tp, m, batch);
  out.combined = tp.add(out.reconstruction, tp.scale(out.negll, lambda));
  return out;
}

struct EpochStats {
  double reconstruction = 0.0;
  double negll = 0.0;
  double combined = 0.0;
};

/// One optimization run over randomly sampled windows of the scaled series.
/// Deterministic given the config seed: identical seeds produce bit-identical
/// parameters. A wall-clock budget, when given, stops at an epoch boundary
/// (intended for long-running smoke runs, not for reproducible training).
inline std::vector<EpochStats> train(LatteModel& m, const SeriesMatrix& scaled, int train_end,
                                     std::optional<double> time_budget_seconds = std::nullopt) {
  const ModelConfig& cfg = m.cfg;
  if (scaled.n() != cfg.n_series)
    throw DimensionError("train: dataset has " + std::to_string(scaled.n()) + " series, model expects " +
                         std::to_string(cfg.n_series));
  const int span = cfg.context_len + cfg.horizon;
  if (train_end < span)
    throw ContractError("train: training range " + std::to_string(train_end) +
                        " holds no full window of " + std::to_string(span) + " steps");
  const int n_windows = train_end - span + 1;
  int batches = cfg.batches_per_epoch;
  if (batches == 0)
    batches = std::clamp(n_windows / std::max(1, cfg.batch_size), 1, 64);

  SeededRng rng = SeededRng(cfg.seed).fork(0x7261696eull);  // training stream
  AdamState opt;
  opt.cfg = cfg.adam;
  auto params = m.parameters();
  std::vector<EpochStats> history;
  const auto started = std::chrono::steady_clock::now();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (time_budget_seconds &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() >
            *time_budget_seconds)
      break;
    EpochStats stats;
    for (int bi = 0; bi < batches; ++bi) {
      WindowBatch batch =
          sample_training_windows(scaled, cfg.context_len, cfg.horizon, cfg.batch_size, train_end, rng);
      Tape tp;
      LossBreakdown loss = loss_combined(tp, m, batch, cfg.lambda);
      const double combined = loss.combined.value();
      if (!std::isfinite(combined))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(bi));
      GradientMap grads = tp.backward(loss.combined);
      clip_gradients(grads, cfg.grad_clip);
      adam_step(params, grads, opt);
      ++m.train_steps;
      stats.reconstruction += loss.reconstruction.value();
      stats.negll += loss.negll.value();
      stats.combined += combined;
    }
    stats.reconstruction /= batches;
    stats.negll /= batches;
    stats.combined /= batches;
    history.push_back(stats);
  }
  return history;
}

/// Monte-Carlo forecast: S latent trajectories sampled sequentially from the
/// conditional flow, each advancing its own conditioner state, then decoded.
struct ForecastEnsemble {
  Tensor samples;              // {S, tau, N}, same units as the context
  std::vector<double> levels;  // quantile levels of `bands`
  Tensor bands;                // {L, tau, N}
  Tensor context;              // {T, N}
};

inline Tensor time_context_copy(const Tensor& context, int t0, int T) {
  Tensor out = Tensor::zeros({T, context.shape[1]});
  for (int t = 0; t < T; ++t)
    for (int s = 0; s < context.shape[1]; ++s) out.at(t, s) = context.at(t0 + t, s);
  return out;
}

inline ForecastEnsemble forecast(LatteModel& m, const Tensor& context, int tau, int s_count,
                                 const SeededRng& rng) {
  if (tau < 1 || s_count < 1) throw ContractError("forecast: need tau >= 1 and S >= 1");
  if (context.rank() != 2 || context.shape[1] != m.cfg.n_series)
    throw DimensionError("forecast: context shape " + shape_to_string(context.shape) +
                         " does not match N=" + std::to_string(m.cfg.n_series));
  const int T = m.cfg.context_len;
  if (context.shape[0] < T)
    throw ContractError("forecast: context has " + std::to_string(context.shape[0]) +
                        " rows, model needs at least " + std::to_string(T));
  const int n = m.cfg.n_series, d = m.cfg.latent_dim, H = m.cfg.hidden_dim;
  const int t0 = context.shape[0] - T;

  // Warm the conditioner through the encoded context (consuming all T steps).
  std::vector<Tensor> warm_h, warm_c;
  {
    Tape tp;
    std::vector<Tensor> lat;
    for (int t = 0; t < T; ++t) {
      Tensor row = Tensor::zeros({1, n});
      for (int s = 0; s < n; ++s) row.at(0, s) = context.at(t0 + t, s);
      lat.push_back(encode(tp, m, tp.input(row)));
    }
    auto states = detail::unroll_hidden(tp, m, lat, T + 1);
    const HiddenState& last = states.back();
    for (const auto& h : last.h) warm_h.push_back(h.detached());
    for (const auto& c : last.c) warm_c.push_back(c.detached());
  }

  // All paths advance together as one batch; each row draws from its own
  // stream forked from (seed, path index), so the result is independent of
  // any batching or threading arrangement.
  std::vector<SeededRng> streams;
  for (int s = 0; s < s_count; ++s) streams.push_back(rng.fork(static_cast<std::uint64_t>(s)));

  auto tile_rows = [&](const Tensor& row1) {
    Tensor out = Tensor::zeros({s_count, row1.shape[1]});
    for (int s = 0; s < s_count; ++s)
      for (int j = 0; j < row1.shape[1]; ++j)
        out.at(s, j) = row1.data[static_cast<std::size_t>(j)];
    return out;
  };

  Tape tp;
  HiddenState state;
  for (auto& h : warm_h) state.h.push_back(tp.input(tile_rows(h)));
  for (auto& c : warm_c) state.c.push_back(tp.input(tile_rows(c)));

  Tensor latents = Tensor::zeros({s_count * tau, d});
  for (int t = 0; t < tau; ++t) {
    Tensor z = Tensor::zeros({s_count, d});
    for (int s = 0; s < s_count; ++s)
      for (int j = 0; j < d; ++j) z.at(s, j) = streams[static_cast<std::size_t>(s)].normal();
    Tensor x = flow_inverse(tp, m.flow, tp.input(z), state.h.back());
    for (int s = 0; s < s_count; ++s)
      for (int j = 0; j < d; ++j) latents.at(s * tau + t, j) = x.at(s, j);
    state = rnn_step(tp, m.rnn, x, state);
  }

  Tensor decoded = decode(tp, m, tp.input(latents));  // {S*tau, N}
  ForecastEnsemble out;
  out.samples = Tensor::zeros({s_count, tau, n});
  for (std::size_t i = 0; i < decoded.data.size(); ++i) out.samples.data[i] = decoded.data[i];
  out.levels = {0.05, 0.25, 0.5, 0.75, 0.95};
  out.bands = ensemble_bands(out.samples, out.levels);
  out.context = time_context_copy(context, t0, T);
  return out;
}

/// Latent codes of every fully observed time step, after the model's scaler.
struct LatentExport {
  std::vector<int> times;
  Tensor codes;  // {rows, D}
};

inline LatentExport export_latent(LatteModel& m, const SeriesMatrix& raw) {
  if (raw.n() != m.cfg.n_series)
    throw DimensionError("export_latent: series has " + std::to_string(raw.n()) +
                         " rows, model expects " + std::to_string(m.cfg.n_series));
  SeriesMatrix scaled = scaler_apply(m.scaler, raw);
  LatentExport out;
  std::vector<int> keep;
  for (int t = 0; t < scaled.t_total(); ++t)
    if (scaled.window_observed(t, t + 1)) keep.push_back(t);
  if (keep.empty()) throw DataError("export_latent: no fully observed time steps");
  Tensor rows = Tensor::zeros({static_cast<int>(keep.size()), raw.n()});
  for (std::size_t i = 0; i < keep.size(); ++i)
    for (int s = 0; s < raw.n(); ++s) rows.at(static_cast<int>(i), s) = scaled.at(s, keep[i]);
  Tape tp;
  Tensor codes = encode(tp, m, tp.input(rows));
  out.times = std::move(keep);
  out.codes = codes.detached();
  return out;
}

}  // namespace latte
