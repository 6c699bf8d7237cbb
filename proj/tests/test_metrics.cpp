#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "latte/metrics.hpp"
#include "latte/rng.hpp"
#include "testutil.hpp"

using namespace latte;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Independent nested-loop reimplementation of the across-series-sum CRPS.
double crps_sum_bruteforce(const Tensor& samples, const Tensor& truth) {
  const int s_count = samples.shape[0], tau = samples.shape[1], n = samples.shape[2];
  double total = 0.0;
  for (int t = 0; t < tau; ++t) {
    double y = 0.0;
    for (int c = 0; c < n; ++c) y += truth.data[static_cast<std::size_t>(t * n + c)];
    double term1 = 0.0, term2 = 0.0;
    for (int a = 0; a < s_count; ++a) {
      double xa = 0.0;
      for (int c = 0; c < n; ++c) xa += samples.data[static_cast<std::size_t>((a * tau + t) * n + c)];
      term1 += std::abs(xa - y);
      for (int b = 0; b < s_count; ++b) {
        double xb = 0.0;
        for (int c = 0; c < n; ++c) xb += samples.data[static_cast<std::size_t>((b * tau + t) * n + c)];
        term2 += std::abs(xa - xb);
      }
    }
    total += term1 / s_count - term2 / (2.0 * s_count * s_count);
  }
  return total / tau;
}

}  // namespace

TEST_CASE("crps closed forms") {
  SECTION("all samples equal the observation") {
    std::vector<double> xs(10, 3.25);
    CHECK(crps_empirical(xs, 3.25) == 0.0);
  }
  SECTION("two samples around the observation") {
    std::vector<double> xs{0.0, 2.0};
    CHECK(crps_empirical(xs, 1.0) == Catch::Approx(0.5).epsilon(1e-14));
  }
  SECTION("fewer than two samples is a contract error") {
    std::vector<double> xs{1.0};
    CHECK_THROWS_AS(crps_empirical(xs, 1.0), ContractError);
  }
}

TEST_CASE("crps against the gaussian closed form") {
  // CRPS(N(0,1), 0) = 2*phi(0) - 1/sqrt(pi)
  const double want = 2.0 / std::sqrt(2.0 * kPi) - 1.0 / std::sqrt(kPi);
  SeededRng rng(31);
  std::vector<double> xs(10000);
  for (auto& x : xs) x = rng.normal();
  CHECK(std::abs(crps_empirical(xs, 0.0) - want) < 0.01);
}

TEST_CASE("crps positive homogeneity") {
  SeededRng rng(32);
  std::vector<double> xs(64);
  for (auto& x : xs) x = rng.normal();
  const double y = 0.4;
  const double base = crps_empirical(xs, y);
  for (double c : {2.0, 0.5, 8.0}) {  // powers of two scale exactly
    std::vector<double> scaled = xs;
    for (auto& x : scaled) x *= c;
    CHECK(crps_empirical(scaled, c * y) == c * base);
  }
  // general positive c up to rounding
  std::vector<double> scaled = xs;
  for (auto& x : scaled) x *= 0.7;
  CHECK(testutil::rel_err(crps_empirical(scaled, 0.7 * y), 0.7 * base) < 1e-12);
}

TEST_CASE("crps is proper at desk scale") {
  SeededRng rng(33);
  double good = 0.0, biased = 0.0;
  const int trials = 10000, s_count = 30;
  std::vector<double> xs(s_count);
  for (int trial = 0; trial < trials; ++trial) {
    const double y = rng.normal();
    for (auto& x : xs) x = rng.normal();
    good += crps_empirical(xs, y);
    for (auto& x : xs) x += 1.0;  // mislocated forecast
    biased += crps_empirical(xs, y);
    for (auto& x : xs) x -= 1.0;
  }
  CHECK(good / trials < biased / trials);
}

TEST_CASE("crps_sum closed forms and oracle") {
  SECTION("perfect deterministic forecast scores zero") {
    Tensor truth = Tensor::zeros({3, 2});
    for (std::size_t i = 0; i < truth.data.size(); ++i) truth.data[i] = 1.0 + static_cast<double>(i);
    Tensor samples = Tensor::zeros({4, 3, 2});
    for (int s = 0; s < 4; ++s)
      for (std::size_t i = 0; i < truth.data.size(); ++i)
        samples.data[static_cast<std::size_t>(s) * truth.data.size() + i] = truth.data[i];
    EnsembleForecast f{samples, truth, {"a", "b"}};
    CHECK(crps_sum(f).raw == 0.0);
    CHECK(crps_sum(f).normalized == 0.0);
  }
  SECTION("N=1 reduces to the time-averaged univariate crps") {
    SeededRng rng(34);
    Tensor truth = Tensor::zeros({5, 1});
    Tensor samples = Tensor::zeros({20, 5, 1});
    for (auto& v : truth.data) v = rng.normal();
    for (auto& v : samples.data) v = rng.normal();
    EnsembleForecast f{samples, truth, {"a"}};
    double manual = 0.0;
    for (int t = 0; t < 5; ++t) {
      std::vector<double> xs(20);
      for (int s = 0; s < 20; ++s) xs[static_cast<std::size_t>(s)] = samples.data[static_cast<std::size_t>(s * 5 + t)];
      manual += crps_empirical(xs, truth.data[static_cast<std::size_t>(t)]);
    }
    manual /= 5.0;
    CHECK(crps_sum(f).raw == Catch::Approx(manual).epsilon(1e-14));
  }
  SECTION("matches the brute-force nested-loop oracle") {
    SeededRng rng(35);
    Tensor truth = Tensor::zeros({4, 3});
    Tensor samples = Tensor::zeros({15, 4, 3});
    for (auto& v : truth.data) v = rng.normal() * 3.0;
    for (auto& v : samples.data) v = rng.normal() * 3.0;
    EnsembleForecast f{samples, truth, {"a", "b", "c"}};
    CHECK(std::abs(crps_sum(f).raw - crps_sum_bruteforce(samples, truth)) < 1e-12);
  }
  SECTION("sample count below 2 is rejected") {
    Tensor truth = Tensor::zeros({2, 2});
    Tensor samples = Tensor::zeros({1, 2, 2});
    EnsembleForecast f{samples, truth, {"a", "b"}};
    CHECK_THROWS_AS(crps_sum(f), ContractError);
  }
}

TEST_CASE("nmse closed forms and properties") {
  SECTION("perfect forecast scores zero everywhere") {
    SeededRng rng(36);
    Tensor truth = Tensor::zeros({6, 3});
    for (auto& v : truth.data) v = rng.normal();
    auto out = nmse(truth, truth);
    for (double v : out) CHECK(v == 0.0);
  }
  SECTION("hand-computed example") {
    Tensor truth = Tensor::zeros({4, 1});
    for (auto& v : truth.data) v = 1.0;
    Tensor pred = truth;
    pred.data[3] = 2.0;
    auto out = nmse(pred, truth);
    // scale 1/4, error (1/4)^2 at one of four steps
    CHECK(out[0] == Catch::Approx(0.25 * 0.25 / 4.0).epsilon(1e-14));
  }
  SECTION("invariant to joint positive rescaling") {
    SeededRng rng(37);
    Tensor truth = Tensor::zeros({5, 2});
    Tensor pred = Tensor::zeros({5, 2});
    for (auto& v : truth.data) v = rng.normal() + 2.0;
    for (auto& v : pred.data) v = rng.normal() + 2.0;
    auto base = nmse(pred, truth);
    Tensor truth4 = truth, pred4 = pred;
    for (auto& v : truth4.data) v *= 4.0;
    for (auto& v : pred4.data) v *= 4.0;
    auto scaled = nmse(pred4, truth4);
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(scaled[i] == base[i]);
  }
  SECTION("all-zero truth is reported as undefined, not dropped") {
    Tensor truth = Tensor::zeros({3, 2});
    for (int t = 0; t < 3; ++t) truth.data[static_cast<std::size_t>(t * 2)] = 1.0;  // series 1 all zero
    Tensor pred = Tensor::full({3, 2}, 0.5);
    std::vector<int> undefined;
    auto out = nmse(pred, truth, &undefined);
    CHECK_FALSE(std::isnan(out[0]));
    CHECK(std::isnan(out[1]));
    CHECK(undefined == std::vector<int>{1});
  }
}

TEST_CASE("quantile bands") {
  SECTION("constant samples collapse to the constant") {
    Tensor samples = Tensor::full({8, 2, 2}, 3.5);
    Tensor bands = quantile_bands(samples, {0.05, 0.5, 0.95});
    for (double v : bands.data) CHECK(v == 3.5);
  }
  SECTION("median of 1..100 under linear interpolation is 50.5") {
    Tensor samples = Tensor::zeros({100, 1, 1});
    for (int s = 0; s < 100; ++s) samples.data[static_cast<std::size_t>(s)] = s + 1.0;
    Tensor bands = quantile_bands(samples, {0.5});
    CHECK(bands.data[0] == Catch::Approx(50.5).epsilon(1e-14));
  }
  SECTION("levels stay monotone on random inputs") {
    SeededRng rng(38);
    Tensor samples = Tensor::zeros({33, 4, 3});
    for (auto& v : samples.data) v = rng.normal();
    Tensor bands = quantile_bands(samples, {0.05, 0.5, 0.95});
    for (int t = 0; t < 4; ++t)
      for (int c = 0; c < 3; ++c) {
        const double q05 = bands.data[static_cast<std::size_t>((0 * 4 + t) * 3 + c)];
        const double q50 = bands.data[static_cast<std::size_t>((1 * 4 + t) * 3 + c)];
        const double q95 = bands.data[static_cast<std::size_t>((2 * 4 + t) * 3 + c)];
        CHECK(q05 <= q50);
        CHECK(q50 <= q95);
      }
  }
  SECTION("empty levels are rejected") {
    Tensor samples = Tensor::zeros({4, 1, 1});
    CHECK_THROWS_AS(quantile_bands(samples, {}), ContractError);
  }
}

TEST_CASE("metric report serializes with fixed field names") {
  MetricReport r;
  r.window_id = 3;
  r.crps_sum_normalized = 0.25;
  r.crps_sum_raw = 1.5;
  r.nmse_per_series = {0.1, std::nan("")};
  r.undefined_series = {1};
  nlohmann::json j = r.to_json({"alpha", "beta"});
  CHECK(j["window_id"] == 3);
  CHECK(j["crps_sum"] == 0.25);
  CHECK(j["crps_sum_raw"] == 1.5);
  CHECK(j["nmse"]["alpha"] == 0.1);
  CHECK(j["nmse"]["beta"].is_null());
}
