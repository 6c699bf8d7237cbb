#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "latte/data.hpp"
#include "latte/metrics.hpp"
#include "latte/model.hpp"

namespace latte {

/// Produces an {S, tau, N} ensemble in ORIGINAL units from a raw context
/// block {T, N}. The window seed makes every window reproducible on its own.
using Forecaster =
    std::function<Tensor(const Tensor& context_raw, int tau, int samples, std::uint64_t window_seed)>;

struct EvalOptions {
  int samples = 100;
  bool point_median = false;  // NMSE point forecast: ensemble mean (default) or median
  int threads = 1;
  std::uint64_t seed = 0;
};

struct EvalReport {
  std::vector<MetricReport> windows;
  std::vector<std::string> names;

  nlohmann::json windows_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& w : windows) arr.push_back(w.to_json(names));
    return arr;
  }

  /// Mean and std (sample std over windows) of each metric, skipped windows
  /// excluded. NMSE aggregates are null for series undefined in any window.
  nlohmann::json aggregate_json() const {
    auto mean_std = [](const std::vector<double>& xs) {
      nlohmann::json j;
      if (xs.empty()) {
        j["mean"] = nullptr;
        j["std"] = nullptr;
        return j;
      }
      double mean = 0.0;
      for (double v : xs) mean += v;
      mean /= static_cast<double>(xs.size());
      double var = 0.0;
      for (double v : xs) var += (v - mean) * (v - mean);
      const double sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
      j["mean"] = mean;
      j["std"] = sd;
      return j;
    };
    std::vector<double> crps, crps_raw;
    int used = 0, skipped = 0;
    for (const auto& w : windows) {
      if (w.skipped) {
        ++skipped;
        continue;
      }
      ++used;
      crps.push_back(w.crps_sum_normalized);
      crps_raw.push_back(w.crps_sum_raw);
    }
    nlohmann::json j;
    j["windows_used"] = used;
    j["windows_skipped"] = skipped;
    j["crps_sum"] = mean_std(crps);
    j["crps_sum_raw"] = mean_std(crps_raw);
    nlohmann::json nm;
    for (std::size_t s = 0; s < names.size(); ++s) {
      std::vector<double> xs;
      bool defined = true;
      for (const auto& w : windows) {
        if (w.skipped) continue;
        const double v = w.nmse_per_series[s];
        if (std::isnan(v)) {
          defined = false;
          break;
        }
        xs.push_back(v);
      }
      nm[names[s]] = defined ? mean_std(xs) : nlohmann::json(nullptr);
    }
    j["nmse"] = nm;
    return j;
  }
};

namespace detail {

inline Tensor ensemble_point(const Tensor& samples, bool median) {
  const int s_count = samples.shape[0], tau = samples.shape[1], n = samples.shape[2];
  Tensor out = Tensor::zeros({tau, n});
  if (!median) {
    for (int s = 0; s < s_count; ++s)
      for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] += samples.data[static_cast<std::size_t>(s) * out.data.size() + i];
    for (auto& v : out.data) v /= static_cast<double>(s_count);
  } else {
    Tensor med = quantile_bands(samples, {0.5});
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = med.data[i];
  }
  return out;
}

}  // namespace detail

/// Run every test window of the plan through the forecaster and score it.
/// Windows with missing cells are reported as skipped, not scored. Window
/// order (and therefore output) is deterministic regardless of thread count.
inline EvalReport rolling_evaluate(const SeriesMatrix& raw, const SplitPlan& plan,
                                   const Forecaster& forecaster, const EvalOptions& opts) {
  if (plan.windows.empty()) throw ContractError("rolling_evaluate: plan has no windows");
  EvalReport report;
  report.names = raw.names;
  report.windows.resize(plan.windows.size());

  auto run_window = [&](std::size_t wi) {
    const TestWindow& w = plan.windows[wi];
    MetricReport& r = report.windows[wi];
    r.window_id = static_cast<int>(wi);
    if (!raw.window_observed(w.context_start, w.horizon_end)) {
      r.skipped = true;
      r.nmse_per_series.assign(static_cast<std::size_t>(raw.n()), std::nan(""));
      return;
    }
    Tensor context = time_block(raw, w.context_start, w.context_end);
    Tensor truth = time_block(raw, w.context_end, w.horizon_end);
    const std::uint64_t wseed = SeededRng(opts.seed).fork(0xe5a1 + wi).seed();
    Tensor samples = forecaster(context, plan.horizon, opts.samples, wseed);
    EnsembleForecast ef{samples, truth, raw.names};
    const CrpsSumResult cs = crps_sum(ef);
    r.crps_sum_normalized = cs.normalized;
    r.crps_sum_raw = cs.raw;
    r.nmse_per_series = nmse(detail::ensemble_point(samples, opts.point_median), truth,
                             &r.undefined_series);
  };

  const int threads = std::max(1, std::min<int>(opts.threads, static_cast<int>(plan.windows.size())));
  if (threads == 1) {
    for (std::size_t wi = 0; wi < plan.windows.size(); ++wi) run_window(wi);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        while (true) {
          const std::size_t wi = next.fetch_add(1);
          if (wi >= plan.windows.size()) break;
          run_window(wi);
        }
      });
    for (auto& th : pool) th.join();
  }
  return report;
}

/// Wrap a trained model: scale the raw context with the model's scaler,
/// forecast, and map the ensemble back to original units.
inline Forecaster model_forecaster(LatteModel& m) {
  return [&m](const Tensor& context_raw, int tau, int samples, std::uint64_t window_seed) {
    Tensor scaled = scaler_apply_block(m.scaler, context_raw);
    ForecastEnsemble ens = forecast(m, scaled, tau, samples, SeededRng(window_seed));
    return scaler_invert_block(m.scaler, ens.samples);
  };
}

/// Repeat the last observed context row with zero spread — the minimal
/// sanity baseline every trained model must beat.
inline Forecaster persistence_forecaster() {
  return [](const Tensor& context_raw, int tau, int samples, std::uint64_t) {
    const int n = context_raw.shape[1];
    const int last = context_raw.shape[0] - 1;
    Tensor out = Tensor::zeros({samples, tau, n});
    for (int s = 0; s < samples; ++s)
      for (int t = 0; t < tau; ++t)
        for (int c = 0; c < n; ++c)
          out.data[static_cast<std::size_t>((s * tau + t) * n + c)] = context_raw.at(last, c);
    return out;
  };
}

}  // namespace latte
