// Command-line front end: train, forecast, evaluate, export-latent, gen-data.
// Every command persists the fully materialized config it ran with, so a rerun
// from that file (same seed) reproduces the outputs byte for byte.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "latte/latte.hpp"

namespace {

using nlohmann::json;

struct RunConfig {
  latte::ModelConfig model;
  bool model_has_n_series = false;
  std::string data_path;
  std::string data_layout = "wide";
  int windows = 0;  // rolling test windows reserved after training
  int metric_samples = 100;
  std::string point_estimate = "mean";
  std::string crps_mode = "normalized";
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;

  json to_json() const {
    json j;
    j["model"] = model.to_json();
    j["data"] = {{"path", data_path}, {"layout", data_layout}};
    j["split"] = {{"windows", windows}};
    j["metrics"] = {{"samples", metric_samples},
                    {"point_estimate", point_estimate},
                    {"crps_mode", crps_mode}};
    j["out_dir"] = out_dir;
    j["seed"] = model.seed;
    return j;
  }

  static RunConfig from_json(const json& j) {
    latte::detail::require_keys(j, {"model", "data", "split", "metrics", "out_dir", "seed"},
                                "run config");
    RunConfig c;
    if (j.count("model")) {
      c.model = latte::ModelConfig::from_json(j.at("model"));
      c.model_has_n_series = j.at("model").count("n_series") > 0;
    }
    if (j.count("data")) {
      latte::detail::require_keys(j.at("data"), {"path", "layout"}, "data section");
      latte::detail::read_field(j.at("data"), "path", c.data_path);
      latte::detail::read_field(j.at("data"), "layout", c.data_layout);
    }
    if (j.count("split")) {
      latte::detail::require_keys(j.at("split"), {"windows"}, "split section");
      latte::detail::read_field(j.at("split"), "windows", c.windows);
    }
    if (j.count("metrics")) {
      latte::detail::require_keys(j.at("metrics"), {"samples", "point_estimate", "crps_mode"},
                                  "metrics section");
      latte::detail::read_field(j.at("metrics"), "samples", c.metric_samples);
      latte::detail::read_field(j.at("metrics"), "point_estimate", c.point_estimate);
      latte::detail::read_field(j.at("metrics"), "crps_mode", c.crps_mode);
    }
    latte::detail::read_field(j, "out_dir", c.out_dir);
    if (j.count("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (c.point_estimate != "mean" && c.point_estimate != "median")
      throw latte::ConfigError("metrics.point_estimate must be mean or median");
    if (c.crps_mode != "normalized" && c.crps_mode != "raw")
      throw latte::ConfigError("metrics.crps_mode must be normalized or raw");
    if (c.windows < 0) throw latte::ConfigError("split.windows must be >= 0");
    if (c.metric_samples < 2) throw latte::ConfigError("metrics.samples must be >= 2");
    return c;
  }
};

RunConfig load_run_config(const std::string& path) {
  json j;
  try {
    j = json::parse(latte::read_file(path));
  } catch (const json::exception& e) {
    throw latte::ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return RunConfig::from_json(j);
}

int eval_threads(std::size_t window_count) {
  const char* env = std::getenv("LATTE_THREADS");
  if (!env) return 1;
  const int v = std::atoi(env);
  if (v < 1) return 1;
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(v), window_count));
}

std::string band_csv(const latte::ForecastEnsemble& ens, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "t,series,q05,q25,q50,q75,q95\n";
  const int tau = ens.samples.shape[1], n = ens.samples.shape[2];
  for (int t = 0; t < tau; ++t)
    for (int s = 0; s < n; ++s) {
      out << (t + 1) << "," << names[static_cast<std::size_t>(s)];
      for (std::size_t l = 0; l < ens.levels.size(); ++l)
        out << ","
            << latte::detail::format_double(
                   ens.bands.data[static_cast<std::size_t>((l * static_cast<std::size_t>(tau) + t) * n + s)]);
      out << "\n";
    }
  return out.str();
}

std::string samples_csv(const latte::Tensor& samples, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "path,t,series,value\n";
  const int s_count = samples.shape[0], tau = samples.shape[1], n = samples.shape[2];
  for (int p = 0; p < s_count; ++p)
    for (int t = 0; t < tau; ++t)
      for (int s = 0; s < n; ++s)
        out << p << "," << (t + 1) << "," << names[static_cast<std::size_t>(s)] << ","
            << latte::detail::format_double(
                   samples.data[static_cast<std::size_t>((p * tau + t) * n + s)])
            << "\n";
  return out.str();
}

std::string to_csv_string(const latte::SeriesMatrix& m, latte::Layout layout) {
  std::ostringstream out;
  latte::write_csv(m, out, layout);
  return out.str();
}

void print_scaler_warnings(const latte::ScalerState& st) {
  for (const auto& w : st.warnings) std::cerr << "warning: " << w << "\n";
}

// --- commands ----------------------------------------------------------------

int cmd_train(RunConfig cfg) {
  if (cfg.data_path.empty()) throw latte::ConfigError("train needs data.path");
  latte::SeriesMatrix data = latte::load_csv(cfg.data_path, latte::layout_from_name(cfg.data_layout));
  if (cfg.model_has_n_series) {
    if (cfg.model.n_series != data.n())
      throw latte::ConfigError("model.n_series = " + std::to_string(cfg.model.n_series) +
                               " but dataset has " + std::to_string(data.n()) + " series");
  } else {
    cfg.model.n_series = data.n();
  }
  if (cfg.seed) cfg.model.seed = *cfg.seed;
  cfg.model.validate();

  const int train_end = cfg.windows > 0 ? data.t_total() - cfg.windows * cfg.model.horizon
                                        : data.t_total();
  if (train_end < cfg.model.context_len + cfg.model.horizon)
    throw latte::DataError("dataset leaves no full training window before the test range");

  latte::LatteModel model = latte::make_model(cfg.model);
  model.scaler = latte::fit_scaler(data, cfg.model.scaler, train_end);
  print_scaler_warnings(model.scaler);
  latte::SeriesMatrix scaled = latte::scaler_apply(model.scaler, data);
  auto history = latte::train(model, scaled, train_end);

  latte::write_file_atomic(cfg.out_dir + "/config.json", cfg.to_json().dump(2) + "\n");
  latte::save_checkpoint(cfg.out_dir + "/checkpoint.bin", model);
  std::ostringstream hist;
  hist << "epoch,rec_loss,negll,combined\n";
  for (std::size_t e = 0; e < history.size(); ++e)
    hist << e << "," << latte::detail::format_double(history[e].reconstruction) << ","
         << latte::detail::format_double(history[e].negll) << ","
         << latte::detail::format_double(history[e].combined) << "\n";
  latte::write_file_atomic(cfg.out_dir + "/loss_history.csv", hist.str());

  json summary;
  summary["checkpoint"] = cfg.out_dir + "/checkpoint.bin";
  summary["epochs"] = history.size();
  summary["train_end"] = train_end;
  if (!history.empty()) {
    summary["final_rec_loss"] = history.back().reconstruction;
    summary["final_negll"] = history.back().negll;
    summary["final_combined"] = history.back().combined;
  }
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_forecast(const std::string& ckpt_path, const std::string& context_path,
                 const std::string& layout, int horizon, int samples, std::uint64_t seed,
                 const std::string& out_dir) {
  latte::LatteModel model = latte::load_checkpoint(ckpt_path);
  latte::SeriesMatrix ctx_series = latte::load_csv(context_path, latte::layout_from_name(layout));
  if (ctx_series.n() != model.cfg.n_series)
    throw latte::ConfigError("context has " + std::to_string(ctx_series.n()) +
                             " series, checkpoint expects " + std::to_string(model.cfg.n_series));
  const int T = model.cfg.context_len;
  if (ctx_series.t_total() < T)
    throw latte::DataError("context has " + std::to_string(ctx_series.t_total()) +
                           " steps, model needs at least " + std::to_string(T));
  if (!ctx_series.window_observed(ctx_series.t_total() - T, ctx_series.t_total()))
    throw latte::DataError("context window contains missing values");
  const int tau = horizon > 0 ? horizon : model.cfg.horizon;

  latte::Tensor raw_ctx = latte::time_block(ctx_series, ctx_series.t_total() - T, ctx_series.t_total());
  latte::Tensor scaled_ctx = latte::scaler_apply_block(model.scaler, raw_ctx);
  latte::ForecastEnsemble ens = latte::forecast(model, scaled_ctx, tau, samples, latte::SeededRng(seed));
  ens.samples = latte::scaler_invert_block(model.scaler, ens.samples);
  ens.bands = latte::ensemble_bands(ens.samples, ens.levels);

  latte::write_file_atomic(out_dir + "/samples.csv", samples_csv(ens.samples, ctx_series.names));
  latte::write_file_atomic(out_dir + "/bands.csv", band_csv(ens, ctx_series.names));
  json cfg;
  cfg["checkpoint"] = ckpt_path;
  cfg["context"] = context_path;
  cfg["layout"] = layout;
  cfg["horizon"] = tau;
  cfg["samples"] = samples;
  cfg["seed"] = seed;
  cfg["out_dir"] = out_dir;
  latte::write_file_atomic(out_dir + "/forecast_config.json", cfg.dump(2) + "\n");
  std::cout << json{{"samples", out_dir + "/samples.csv"}, {"bands", out_dir + "/bands.csv"}}.dump(2)
            << "\n";
  return 0;
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& data_path,
                 const std::string& layout, int windows, int samples, std::uint64_t seed,
                 const std::string& point_estimate, const std::string& crps_mode,
                 const std::string& out_dir) {
  latte::LatteModel model = latte::load_checkpoint(ckpt_path);
  latte::SeriesMatrix data = latte::load_csv(data_path, latte::layout_from_name(layout));
  if (data.n() != model.cfg.n_series)
    throw latte::ConfigError("dataset has " + std::to_string(data.n()) +
                             " series, checkpoint expects " + std::to_string(model.cfg.n_series));
  if (windows < 1) throw latte::ConfigError("evaluate needs --windows >= 1");
  latte::SplitPlan plan =
      latte::rolling_splits(data, windows, model.cfg.horizon, model.cfg.context_len);

  latte::EvalOptions opts;
  opts.samples = samples;
  opts.point_median = point_estimate == "median";
  opts.seed = seed;
  opts.threads = eval_threads(plan.windows.size());

  latte::EvalReport report = latte::rolling_evaluate(data, plan, latte::model_forecaster(model), opts);
  latte::EvalReport baseline =
      latte::rolling_evaluate(data, plan, latte::persistence_forecaster(), opts);

  json aggregate = report.aggregate_json();
  aggregate["baseline_persistence"] = baseline.aggregate_json();
  aggregate["crps_mode"] = crps_mode;
  latte::write_file_atomic(out_dir + "/windows.json", report.windows_json().dump(2) + "\n");
  latte::write_file_atomic(out_dir + "/aggregate.json", aggregate.dump(2) + "\n");
  latte::write_file_atomic(out_dir + "/splitplan.json", plan.to_json().dump(2) + "\n");
  json cfg;
  cfg["checkpoint"] = ckpt_path;
  cfg["data"] = data_path;
  cfg["layout"] = layout;
  cfg["windows"] = windows;
  cfg["samples"] = samples;
  cfg["seed"] = seed;
  cfg["point_estimate"] = point_estimate;
  cfg["crps_mode"] = crps_mode;
  cfg["out_dir"] = out_dir;
  latte::write_file_atomic(out_dir + "/evaluate_config.json", cfg.dump(2) + "\n");
  std::cout << aggregate.dump(2) << "\n";
  return 0;
}

int cmd_export_latent(const std::string& ckpt_path, const std::string& data_path,
                      const std::string& layout, const std::string& out_dir) {
  latte::LatteModel model = latte::load_checkpoint(ckpt_path);
  latte::SeriesMatrix data = latte::load_csv(data_path, latte::layout_from_name(layout));
  latte::LatentExport ex = latte::export_latent(model, data);
  std::ostringstream out;
  out << "t";
  for (int j = 0; j < model.cfg.latent_dim; ++j) out << ",x" << (j + 1);
  out << "\n";
  for (std::size_t i = 0; i < ex.times.size(); ++i) {
    out << ex.times[i];
    for (int j = 0; j < model.cfg.latent_dim; ++j)
      out << "," << latte::detail::format_double(ex.codes.at(static_cast<int>(i), j));
    out << "\n";
  }
  latte::write_file_atomic(out_dir + "/latent.csv", out.str());
  json cfg;
  cfg["checkpoint"] = ckpt_path;
  cfg["data"] = data_path;
  cfg["layout"] = layout;
  cfg["out_dir"] = out_dir;
  latte::write_file_atomic(out_dir + "/export_config.json", cfg.dump(2) + "\n");
  std::cout << json{{"latent", out_dir + "/latent.csv"}, {"rows", ex.times.size()}}.dump(2) << "\n";
  return 0;
}

int cmd_gen_data(const std::string& kind, int n, int d, int steps, std::uint64_t seed, double noise,
                 const std::string& out_file, const std::string& oracle_out) {
  latte::SeriesMatrix series;
  json oracle;
  if (kind == "var") {
    auto [m, orc] = latte::gen_synthetic_latent_var(n, d, steps, seed);
    series = std::move(m);
    oracle = orc.to_json();
  } else if (kind == "sines") {
    series = latte::gen_sine_mixture(n, steps, seed, noise);
  } else if (kind == "two-regime") {
    auto [m, switch_t] = latte::gen_two_regime(n, steps, seed);
    series = std::move(m);
    oracle["switch_t"] = switch_t;
  } else {
    throw latte::ConfigError("unknown kind '" + kind + "' (var, sines, two-regime)");
  }
  latte::write_file_atomic(out_file, to_csv_string(series, latte::Layout::wide));
  if (!oracle_out.empty() && !oracle.is_null()) latte::write_file_atomic(oracle_out, oracle.dump() + "\n");
  json cfg;
  cfg["kind"] = kind;
  cfg["series"] = n;
  cfg["latent_dim"] = d;
  cfg["steps"] = steps;
  cfg["seed"] = seed;
  cfg["noise"] = noise;
  cfg["out"] = out_file;
  latte::write_file_atomic(out_file + ".gen_config.json", cfg.dump(2) + "\n");
  std::cout << json{{"data", out_file}}.dump(2) << "\n";
  return 0;
}

json error_json(const char* type, const std::string& message) {
  return json{{"error", {{"type", type}, {"message", message}}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latte: probabilistic multivariate time-series forecasting in a learned latent space"};
  app.require_subcommand(1);

  std::string config_path, ckpt, data_path, context_path, layout = "wide", out_dir = "out";
  std::string kind = "var", point_estimate = "mean", crps_mode = "normalized", oracle_out;
  int horizon = 0, samples = 100, windows = 0, n = 8, latent_dim = 2, steps = 1000;
  std::uint64_t seed = 42;
  int context_len = 0;
  std::string flow_kind = "realnvp";
  double noise = 0.05;

  auto* tr = app.add_subcommand("train", "train a model from a run config");
  tr->add_option("--config", config_path, "run config JSON")->required();
  tr->add_option("--seed", seed);
  tr->add_option("--out", out_dir);
  tr->add_option("--flow", flow_kind, "realnvp or maf");
  tr->add_option("--latent-dim", latent_dim);
  tr->add_option("--horizon", horizon);
  tr->add_option("--context", context_len);
  tr->add_option("--windows", windows);
  tr->add_option("--samples", samples);

  auto* fc = app.add_subcommand("forecast", "sample future trajectories from a checkpoint");
  fc->add_option("--checkpoint", ckpt)->required();
  fc->add_option("--context", context_path, "context CSV")->required();
  fc->add_option("--layout", layout, "wide or long");
  fc->add_option("--horizon", horizon, "steps ahead (default: model horizon)");
  fc->add_option("--samples", samples);
  fc->add_option("--seed", seed);
  fc->add_option("--out", out_dir);

  auto* ev = app.add_subcommand("evaluate", "rolling-window evaluation with CRPS-Sum and NMSE");
  ev->add_option("--checkpoint", ckpt)->required();
  ev->add_option("--data", data_path)->required();
  ev->add_option("--layout", layout);
  ev->add_option("--windows", windows)->required();
  ev->add_option("--samples", samples);
  ev->add_option("--seed", seed);
  ev->add_option("--point-estimate", point_estimate, "mean or median");
  ev->add_option("--crps-mode", crps_mode, "normalized or raw");
  ev->add_option("--out", out_dir);

  auto* ex = app.add_subcommand("export-latent", "write per-time-step latent codes");
  ex->add_option("--checkpoint", ckpt)->required();
  ex->add_option("--data", data_path)->required();
  ex->add_option("--layout", layout);
  ex->add_option("--out", out_dir);

  auto* gd = app.add_subcommand("gen-data", "write a synthetic dataset");
  gd->add_option("--kind", kind, "var, sines or two-regime");
  gd->add_option("--series", n);
  gd->add_option("--latent-dim", latent_dim);
  gd->add_option("--steps", steps);
  gd->add_option("--seed", seed);
  gd->add_option("--noise", noise, "sines only");
  gd->add_option("--out", out_dir, "output CSV path")->required();
  gd->add_option("--oracle-out", oracle_out, "where to write generator parameters (var kind)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << error_json("config", e.what()).dump() << "\n";
    return 2;
  }

  try {
    if (tr->parsed()) {
      RunConfig cfg = load_run_config(config_path);
      if (tr->count("--seed")) cfg.seed = seed;
      if (tr->count("--out")) cfg.out_dir = out_dir;
      if (tr->count("--flow")) cfg.model.flow = latte::flow_from_name(flow_kind);
      if (tr->count("--latent-dim")) cfg.model.latent_dim = latent_dim;
      if (tr->count("--horizon")) cfg.model.horizon = horizon;
      if (tr->count("--context")) cfg.model.context_len = context_len;
      if (tr->count("--windows")) cfg.windows = windows;
      if (tr->count("--samples")) cfg.metric_samples = samples;
      return cmd_train(std::move(cfg));
    }
    if (fc->parsed())
      return cmd_forecast(ckpt, context_path, layout, horizon, samples, seed, out_dir);
    if (ev->parsed())
      return cmd_evaluate(ckpt, data_path, layout, windows, samples, seed, point_estimate,
                          crps_mode, out_dir);
    if (ex->parsed()) return cmd_export_latent(ckpt, data_path, layout, out_dir);
    if (gd->parsed())
      return cmd_gen_data(kind, n, latent_dim, steps, seed, noise, out_dir, oracle_out);
  } catch (const latte::ConfigError& e) {
    std::cerr << error_json("config", e.what()).dump() << "\n";
    return 2;
  } catch (const latte::ContractError& e) {
    std::cerr << error_json("config", e.what()).dump() << "\n";
    return 2;
  } catch (const latte::DimensionError& e) {
    std::cerr << error_json("config", e.what()).dump() << "\n";
    return 2;
  } catch (const latte::ParseError& e) {
    std::cerr << error_json("data", e.what()).dump() << "\n";
    return 3;
  } catch (const latte::DataError& e) {
    std::cerr << error_json("data", e.what()).dump() << "\n";
    return 3;
  } catch (const latte::NumericError& e) {
    std::cerr << error_json("numeric", e.what()).dump() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << error_json("internal", e.what()).dump() << "\n";
    return 1;
  }
  return 0;
}
