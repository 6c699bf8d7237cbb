#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "latte/errors.hpp"
#include "latte/tensor.hpp"

namespace latte {

/// Empirical CRPS of a sample ensemble against one realized value, in the
/// pairwise form  (1/S) sum|X_s - y| - 1/(2 S^2) sum_{s,s'} |X_s - X_s'|.
inline double crps_empirical(std::span<const double> samples, double y) {
  const std::size_t s_count = samples.size();
  if (s_count < 2) throw ContractError("crps_empirical: need at least 2 samples");
  double term1 = 0.0;
  for (double x : samples) term1 += std::abs(x - y);
  term1 /= static_cast<double>(s_count);
  double term2 = 0.0;
  for (std::size_t i = 0; i < s_count; ++i)
    for (std::size_t j = 0; j < s_count; ++j) term2 += std::abs(samples[i] - samples[j]);
  term2 /= 2.0 * static_cast<double>(s_count) * static_cast<double>(s_count);
  return term1 - term2;
}

/// Ensemble forecast paired with its ground truth.
struct EnsembleForecast {
  Tensor samples;  // {S, tau, N}
  Tensor truth;    // {tau, N}
  std::vector<std::string> names;
};

inline void check_ensemble(const EnsembleForecast& f) {
  if (f.samples.rank() != 3 || f.truth.rank() != 2)
    throw DimensionError("ensemble forecast needs samples {S,tau,N} and truth {tau,N}");
  if (f.samples.shape[1] != f.truth.shape[0] || f.samples.shape[2] != f.truth.shape[1])
    throw DimensionError("ensemble samples " + shape_to_string(f.samples.shape) +
                         " do not match truth " + shape_to_string(f.truth.shape));
  if (f.samples.shape[0] < 2) throw ContractError("ensemble needs S >= 2 samples for CRPS");
}

struct CrpsSumResult {
  double normalized = 0.0;  // raw / mean |sum_n y_{n,t}| over the horizon
  double raw = 0.0;
  double scale = 1.0;
};

/// CRPS of the across-series sum, averaged over the horizon. Both the raw
/// value and the scale-free ratio (divided by the mean absolute summed truth)
/// are reported.
inline CrpsSumResult crps_sum(const EnsembleForecast& f) {
  check_ensemble(f);
  const int s_count = f.samples.shape[0], tau = f.samples.shape[1], n = f.samples.shape[2];
  std::vector<double> summed(static_cast<std::size_t>(s_count));
  double acc = 0.0, scale_acc = 0.0;
  for (int t = 0; t < tau; ++t) {
    for (int s = 0; s < s_count; ++s) {
      double v = 0.0;
      for (int c = 0; c < n; ++c)
        v += f.samples.data[static_cast<std::size_t>((s * tau + t) * n + c)];
      summed[static_cast<std::size_t>(s)] = v;
    }
    double truth_sum = 0.0;
    for (int c = 0; c < n; ++c) truth_sum += f.truth.data[static_cast<std::size_t>(t * n + c)];
    acc += crps_empirical(summed, truth_sum);
    scale_acc += std::abs(truth_sum);
  }
  CrpsSumResult r;
  r.raw = acc / static_cast<double>(tau);
  r.scale = scale_acc / static_cast<double>(tau);
  r.normalized = r.scale > 0.0 ? r.raw / r.scale : r.raw;
  return r;
}

/// Per-series normalized MSE: both prediction and truth are divided by the
/// sum of the truth's absolute values over the horizon, then squared errors
/// are averaged. A series whose truth is identically zero has no defined
/// value; it is returned as NaN and its index appended to `undefined`.
inline std::vector<double> nmse(const Tensor& pred, const Tensor& truth,
                                std::vector<int>* undefined = nullptr) {
  if (pred.rank() != 2 || truth.rank() != 2 || pred.shape != truth.shape)
    throw DimensionError("nmse: pred " + shape_to_string(pred.shape) + " vs truth " +
                         shape_to_string(truth.shape));
  const int tau = pred.shape[0], n = pred.shape[1];
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int s = 0; s < n; ++s) {
    double denom = 0.0;
    for (int t = 0; t < tau; ++t) denom += std::abs(truth.data[static_cast<std::size_t>(t * n + s)]);
    if (denom <= 0.0) {
      out[static_cast<std::size_t>(s)] = std::nan("");
      if (undefined) undefined->push_back(s);
      continue;
    }
    double acc = 0.0;
    for (int t = 0; t < tau; ++t) {
      const double d = (pred.data[static_cast<std::size_t>(t * n + s)] -
                        truth.data[static_cast<std::size_t>(t * n + s)]) / denom;
      acc += d * d;
    }
    out[static_cast<std::size_t>(s)] = acc / static_cast<double>(tau);
  }
  return out;
}

/// Linear-interpolation quantile of a sorted vector at level q in (0,1).
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  // a + frac*(b-a) is exact when a == b, unlike the two-product form
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

/// Empirical per-cell quantiles of an {S, tau, N} ensemble at the given
/// levels; result is {L, tau, N}, monotone across levels by construction.
inline Tensor quantile_bands(const Tensor& samples, const std::vector<double>& levels) {
  if (samples.rank() != 3) throw DimensionError("quantile_bands: need samples {S,tau,N}");
  if (levels.empty()) throw ContractError("quantile_bands: need at least one level");
  for (double q : levels)
    if (!(q > 0.0 && q < 1.0)) throw ContractError("quantile_bands: levels must lie in (0,1)");
  const int s_count = samples.shape[0], tau = samples.shape[1], n = samples.shape[2];
  if (s_count < 2) throw ContractError("quantile_bands: need S >= 2 samples");
  Tensor out = Tensor::zeros({static_cast<int>(levels.size()), tau, n});
  std::vector<double> cell(static_cast<std::size_t>(s_count));
  for (int t = 0; t < tau; ++t)
    for (int c = 0; c < n; ++c) {
      for (int s = 0; s < s_count; ++s)
        cell[static_cast<std::size_t>(s)] = samples.data[static_cast<std::size_t>((s * tau + t) * n + c)];
      std::sort(cell.begin(), cell.end());
      for (std::size_t l = 0; l < levels.size(); ++l)
        out.data[static_cast<std::size_t>((l * static_cast<std::size_t>(tau) + t) * n + c)] =
            quantile_sorted(cell, levels[l]);
    }
  return out;
}

/// Bands for an ensemble of any size: a single path collapses every level to
/// that path (quantile_bands proper requires S >= 2).
inline Tensor ensemble_bands(const Tensor& samples, const std::vector<double>& levels) {
  if (samples.rank() != 3) throw DimensionError("ensemble_bands: need samples {S,tau,N}");
  if (samples.shape[0] == 1) {
    if (levels.empty()) throw ContractError("ensemble_bands: need at least one level");
    const int tau = samples.shape[1], n = samples.shape[2];
    Tensor out = Tensor::zeros({static_cast<int>(levels.size()), tau, n});
    for (std::size_t l = 0; l < levels.size(); ++l)
      for (std::size_t i = 0; i < samples.data.size(); ++i)
        out.data[l * samples.data.size() + i] = samples.data[i];
    return out;
  }
  return quantile_bands(samples, levels);
}

/// Metrics of one evaluation window, serializable with fixed field names.
struct MetricReport {
  int window_id = 0;
  double crps_sum_normalized = 0.0;
  double crps_sum_raw = 0.0;
  std::vector<double> nmse_per_series;  // NaN where undefined
  std::vector<int> undefined_series;
  bool skipped = false;

  nlohmann::json to_json(const std::vector<std::string>& names) const {
    nlohmann::json j;
    j["window_id"] = window_id;
    j["skipped"] = skipped;
    if (skipped) return j;
    j["crps_sum"] = crps_sum_normalized;
    j["crps_sum_raw"] = crps_sum_raw;
    nlohmann::json nm;
    for (std::size_t s = 0; s < nmse_per_series.size(); ++s) {
      const std::string key = s < names.size() ? names[s] : "s" + std::to_string(s);
      if (std::isnan(nmse_per_series[s]))
        nm[key] = nullptr;
      else
        nm[key] = nmse_per_series[s];
    }
    j["nmse"] = nm;
    return j;
  }
};

}  // namespace latte
