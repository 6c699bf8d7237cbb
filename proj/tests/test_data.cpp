#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "latte/data.hpp"
#include "testutil.hpp"

using namespace latte;

namespace {

std::string tmp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "latte_data_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("wide csv parses series columns and rows") {
  const auto path = tmp_file("wide.csv");
  write_text(path, "time,a,b\n0,1.5,2\n1,2.5,3\n2,3.5,4\n");
  SeriesMatrix m = load_csv(path, Layout::wide);
  CHECK(m.n() == 2);
  CHECK(m.t_total() == 3);
  CHECK(m.names == std::vector<std::string>{"a", "b"});
  CHECK(m.at(0, 0) == 1.5);
  CHECK(m.at(1, 2) == 4.0);
}

TEST_CASE("wide csv without a time column still loads") {
  const auto path = tmp_file("wide_nt.csv");
  write_text(path, "a,b\n1,2\n3,4\n");
  SeriesMatrix m = load_csv(path, Layout::wide);
  CHECK(m.n() == 2);
  CHECK(m.t_total() == 2);
  CHECK(m.time == std::vector<std::string>{"0", "1"});
}

TEST_CASE("long csv masks gaps instead of zero-filling") {
  const auto path = tmp_file("long_gap.csv");
  write_text(path, "series,time,value\na,0,1\na,1,2\nb,0,5\nb,2,7\na,2,3\n");
  SeriesMatrix m = load_csv(path, Layout::long_fmt);
  CHECK(m.n() == 2);
  CHECK(m.t_total() == 3);
  CHECK(m.observed(0, 0));
  CHECK_FALSE(m.observed(1, 1));  // b at time 1 was never given
  CHECK(std::isnan(m.at(1, 1)));
  CHECK(m.at(1, 2) == 7.0);
}

TEST_CASE("csv parse errors carry line numbers") {
  const auto ragged = tmp_file("ragged.csv");
  write_text(ragged, "time,a,b\n0,1,2\n1,3\n");
  try {
    load_csv(ragged, Layout::wide);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  const auto badnum = tmp_file("badnum.csv");
  write_text(badnum, "time,a\n0,1\n1,oops\n");
  try {
    load_csv(badnum, Layout::wide);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    CHECK(std::string(e.what()).find("oops") != std::string::npos);
  }

  const auto dup = tmp_file("dup.csv");
  write_text(dup, "series,time,value\na,0,1\na,0,2\n");
  try {
    load_csv(dup, Layout::long_fmt);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
  }
}

TEST_CASE("csv round trips are bit-exact") {
  SeededRng rng(3);
  Tensor values = Tensor::zeros({3, 17});
  for (auto& v : values.data) v = rng.normal() * std::pow(10.0, rng.uniform(-8.0, 8.0));
  SeriesMatrix m = make_series(values, {"x", "y", "z"});

  SECTION("wide -> load") {
    const auto path = tmp_file("rt_wide.csv");
    write_csv(m, path, Layout::wide);
    SeriesMatrix back = load_csv(path, Layout::wide);
    CHECK(back.values.data == m.values.data);
    CHECK(back.names == m.names);
    CHECK(back.time == m.time);
  }
  SECTION("wide -> long -> wide") {
    const auto plong = tmp_file("rt_long.csv");
    write_csv(m, plong, Layout::long_fmt);
    SeriesMatrix mid = load_csv(plong, Layout::long_fmt);
    const auto pwide = tmp_file("rt_wide2.csv");
    write_csv(mid, pwide, Layout::wide);
    SeriesMatrix back = load_csv(pwide, Layout::wide);
    CHECK(back.values.data == m.values.data);
    CHECK(back.names == m.names);
  }
}

TEST_CASE("scaler: round trip, statistics, leakage") {
  SeededRng rng(4);
  Tensor values = Tensor::zeros({2, 60});
  for (auto& v : values.data) v = 3.0 + 2.0 * rng.normal();
  SeriesMatrix m = make_series(values, {"a", "b"});
  ScalerState st = fit_scaler(m, "standard", 40);

  SECTION("apply then invert is the identity") {
    SeriesMatrix scaled = scaler_apply(st, m);
    Tensor block = time_block(scaled, 0, 60);
    Tensor back = scaler_invert_block(st, block);
    Tensor orig = time_block(m, 0, 60);
    for (std::size_t i = 0; i < back.data.size(); ++i)
      CHECK(std::abs(back.data[i] - orig.data[i]) < 1e-12);
  }
  SECTION("standardized training segment has mean 0 and std 1") {
    SeriesMatrix scaled = scaler_apply(st, m);
    for (int s = 0; s < 2; ++s) {
      double mean = 0.0, var = 0.0;
      for (int t = 0; t < 40; ++t) mean += scaled.at(s, t);
      mean /= 40.0;
      for (int t = 0; t < 40; ++t) var += (scaled.at(s, t) - mean) * (scaled.at(s, t) - mean);
      var /= 40.0;
      CHECK(std::abs(mean) < 1e-10);
      CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-10);
    }
  }
  SECTION("statistics ignore everything past train_end") {
    SeriesMatrix tampered = m;
    for (int t = 40; t < 60; ++t)
      for (int s = 0; s < 2; ++s) tampered.values.at(s, t) += 1e6;
    ScalerState st2 = fit_scaler(tampered, "standard", 40);
    CHECK(st2.offset == st.offset);
    CHECK(st2.scale == st.scale);
  }
  SECTION("constant series gets unit scale and a warning") {
    Tensor cvals = Tensor::full({1, 20}, 5.0);
    SeriesMatrix cm = make_series(cvals, {"const"});
    ScalerState cst = fit_scaler(cm, "standard", 20);
    CHECK(cst.scale[0] == 1.0);
    CHECK_FALSE(cst.warnings.empty());
  }
}

TEST_CASE("training window sampling") {
  SeededRng gen(5);
  Tensor values = Tensor::zeros({2, 50});
  for (auto& v : values.data) v = gen.normal();
  SeriesMatrix m = make_series(values, {"a", "b"});

  SECTION("exact-fit training range has a single possible window") {
    SeededRng rng(6);
    WindowBatch wb = sample_training_windows(m, 6, 4, 8, 10, rng);
    for (int s : wb.start_offsets) CHECK(s == 0);
  }
  SECTION("starts stay inside the training range") {
    SeededRng rng(7);
    for (int rep = 0; rep < 20; ++rep) {
      WindowBatch wb = sample_training_windows(m, 6, 4, 16, 37, rng);
      for (int s : wb.start_offsets) {
        CHECK(s >= 0);
        CHECK(s <= 37 - 10);
      }
    }
  }
  SECTION("window content is a contiguous slice") {
    SeededRng rng(8);
    WindowBatch wb = sample_training_windows(m, 6, 4, 4, 50, rng);
    for (int w = 0; w < wb.batch(); ++w) {
      const int start = wb.start_offsets[static_cast<std::size_t>(w)];
      for (int t = 0; t < 10; ++t)
        for (int s = 0; s < 2; ++s)
          CHECK(wb.step(t).at(w, s) == m.at(s, start + t));
    }
  }
  SECTION("start distribution is uniform (chi-squared)") {
    SeededRng rng(9);
    const int span = 6 + 4;
    const int train_end = 29;  // 20 possible starts
    const int k = train_end - span + 1;
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    const int draws = 100000;
    for (int i = 0; i < draws / 10; ++i) {
      WindowBatch wb = sample_training_windows(m, 6, 4, 10, train_end, rng);
      for (int s : wb.start_offsets) ++counts[static_cast<std::size_t>(s)];
    }
    const double expect = static_cast<double>(draws) / k;
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
    CHECK(chi2 < 50.0);  // df = 19; p ~ 1e-4 cutoff is 43.8
  }
  SECTION("windows with masked cells are resampled") {
    SeriesMatrix holed = m;
    for (int t = 10; t < 40; ++t) holed.mask[static_cast<std::size_t>(0) * 50 + t] = 0;
    SeededRng rng(10);
    WindowBatch wb = sample_training_windows(holed, 4, 2, 8, 50, rng);
    for (int s : wb.start_offsets) CHECK((s + 6 <= 10 || s >= 40));
  }
  SECTION("no valid window is a contract error") {
    SeriesMatrix all_holes = m;
    for (auto& v : all_holes.mask) v = 0;
    SeededRng rng(11);
    CHECK_THROWS_AS(sample_training_windows(all_holes, 4, 2, 2, 50, rng), ContractError);
  }
}

TEST_CASE("rolling splits tile the series tail") {
  SeededRng gen(12);
  Tensor values = Tensor::zeros({1, 200});
  for (auto& v : values.data) v = gen.normal();
  SeriesMatrix m = make_series(values, {"a"});

  SECTION("7 windows of 24 cover the last 168 points") {
    SplitPlan plan = rolling_splits(m, 7, 24, 24);
    REQUIRE(plan.windows.size() == 7);
    CHECK(plan.train_end == 200 - 168);
    CHECK(plan.windows.front().context_end == plan.train_end);
    CHECK(plan.windows.back().horizon_end == 200);
    int covered = 0;
    for (std::size_t i = 0; i < plan.windows.size(); ++i) {
      const auto& w = plan.windows[i];
      covered += w.horizon_end - w.context_end;
      CHECK(w.context_end - w.context_start == 24);
      if (i > 0) CHECK(w.context_end == plan.windows[i - 1].horizon_end);
    }
    CHECK(covered == 168);
  }
  SECTION("single holdout") {
    SplitPlan plan = rolling_splits(m, 1, 30, 20);
    REQUIRE(plan.windows.size() == 1);
    CHECK(plan.train_end == 170);
    CHECK(plan.windows[0].horizon_end == 200);
  }
  SECTION("insufficient length reports the required minimum") {
    try {
      rolling_splits(m, 10, 24, 24);
      FAIL("expected ContractError");
    } catch (const ContractError& e) {
      CHECK(std::string(e.what()).find(std::to_string(24 + 10 * 24)) != std::string::npos);
    }
  }
  SECTION("json round trip") {
    SplitPlan plan = rolling_splits(m, 3, 10, 20);
    SplitPlan back = SplitPlan::from_json(plan.to_json());
    CHECK(back.train_end == plan.train_end);
    REQUIRE(back.windows.size() == plan.windows.size());
    for (std::size_t i = 0; i < plan.windows.size(); ++i) {
      CHECK(back.windows[i].context_start == plan.windows[i].context_start);
      CHECK(back.windows[i].horizon_end == plan.windows[i].horizon_end);
    }
  }
}

TEST_CASE("latent var generator") {
  SECTION("same seed, same dataset") {
    auto [m1, o1] = gen_synthetic_latent_var(6, 2, 300, 77);
    auto [m2, o2] = gen_synthetic_latent_var(6, 2, 300, 77);
    CHECK(m1.values.data == m2.values.data);
    CHECK(o1.A.data == o2.A.data);
  }
  SECTION("A = 0 gives white-noise latents centred on b") {
    VarOracle oracle;
    oracle.A = Tensor::zeros({2, 2});
    oracle.W = Tensor::matrix(3, 2, {1, 0, 0, 1, 1, 1});
    oracle.b = {2.0, -1.0, 0.5};
    oracle.sigma_latent = 1.0;
    oracle.sigma_obs = 0.0;
    SeededRng rng(13);
    SeriesMatrix m = simulate_latent_var(oracle, 20000, rng);
    // optimal forecast mean is b; check the sample mean approaches it
    for (int s = 0; s < 3; ++s) {
      double mean = 0.0;
      for (int t = 0; t < m.t_total(); ++t) mean += m.at(s, t);
      mean /= m.t_total();
      CHECK(std::abs(mean - oracle.b[static_cast<std::size_t>(s)]) < 0.05);
    }
    // lag-1 autocorrelation of the latents is ~0
    double num = 0.0, den = 0.0;
    for (int t = 1; t < m.t_total(); ++t) {
      num += oracle.latents.at(t, 0) * oracle.latents.at(t - 1, 0);
      den += oracle.latents.at(t - 1, 0) * oracle.latents.at(t - 1, 0);
    }
    CHECK(std::abs(num / den) < 0.05);
  }
  SECTION("empirical lag-1 latent dynamics recover A") {
    auto [m, oracle] = gen_synthetic_latent_var(5, 2, 5000, 14);
    // least squares: A_hat = (sum x_t x_{t-1}^T)(sum x_{t-1} x_{t-1}^T)^{-1}
    double cxx[2][2] = {{0, 0}, {0, 0}};
    double cxy[2][2] = {{0, 0}, {0, 0}};
    for (int t = 1; t < 5000; ++t)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          cxy[i][j] += oracle.latents.at(t, i) * oracle.latents.at(t - 1, j);
          cxx[i][j] += oracle.latents.at(t - 1, i) * oracle.latents.at(t - 1, j);
        }
    for (int i = 0; i < 2; ++i) {
      // solve A_hat[i][:] from cxx^T a = cxy[i][:]
      auto a = testutil::solve_small({{cxx[0][0], cxx[1][0]}, {cxx[0][1], cxx[1][1]}},
                                     {cxy[i][0], cxy[i][1]});
      for (int j = 0; j < 2; ++j) CHECK(std::abs(a[static_cast<std::size_t>(j)] - oracle.A.at(i, j)) < 0.05);
    }
  }
  SECTION("analytic 1-step predictive variance matches monte carlo") {
    auto [m, oracle] = gen_synthetic_latent_var(4, 2, 50, 15);
    const std::vector<double> x0 = {oracle.latents.at(49, 0), oracle.latents.at(49, 1)};
    const auto mean1 = oracle.mean_k(x0, 1);
    const auto var1 = oracle.var_k(1);
    SeededRng rng(16);
    const int rollouts = 10000;
    std::vector<double> acc(4, 0.0), acc2(4, 0.0);
    for (int r = 0; r < rollouts; ++r) {
      double xr[2];
      for (int i = 0; i < 2; ++i) {
        xr[i] = 0.0;
        for (int j = 0; j < 2; ++j) xr[i] += oracle.A.at(i, j) * x0[static_cast<std::size_t>(j)];
        xr[i] += oracle.sigma_latent * rng.normal();
      }
      for (int s = 0; s < 4; ++s) {
        double y = oracle.b[static_cast<std::size_t>(s)] + oracle.sigma_obs * rng.normal();
        for (int j = 0; j < 2; ++j) y += oracle.W.at(s, j) * xr[j];
        acc[static_cast<std::size_t>(s)] += y;
        acc2[static_cast<std::size_t>(s)] += y * y;
      }
    }
    for (int s = 0; s < 4; ++s) {
      const double mc_mean = acc[static_cast<std::size_t>(s)] / rollouts;
      const double mc_var = acc2[static_cast<std::size_t>(s)] / rollouts - mc_mean * mc_mean;
      CHECK(std::abs(mc_mean - mean1[static_cast<std::size_t>(s)]) <
            4.0 * std::sqrt(var1[static_cast<std::size_t>(s)] / rollouts));
      CHECK(std::abs(mc_var - var1[static_cast<std::size_t>(s)]) < 0.05 * var1[static_cast<std::size_t>(s)]);
    }
  }
}

TEST_CASE("sine mixture generator") {
  SECTION("zero noise is exactly periodic") {
    SeriesMatrix m = gen_sine_mixture(2, 128, 17, 0.0);
    // the second sinusoid runs at half the period of the first, so the
    // signal repeats with the first period p; find it via autocorrelation
    for (int s = 0; s < 2; ++s) {
      double best = -1e9;
      int best_lag = 0;
      for (int lag = 6; lag <= 40; ++lag) {
        double acf = 0.0;
        for (int t = lag; t < 128; ++t) acf += m.at(s, t) * m.at(s, t - lag);
        if (acf > best) {
          best = acf;
          best_lag = lag;
        }
      }
      // exact periodicity at the detected lag
      double max_diff = 0.0;
      for (int t = best_lag; t < 128; ++t)
        max_diff = std::max(max_diff, std::abs(m.at(s, t) - m.at(s, t - best_lag)));
      CHECK(max_diff < 1e-9);
    }
  }
  SECTION("values bounded by the sum of amplitudes") {
    SeriesMatrix m = gen_sine_mixture(4, 500, 18, 0.0);
    for (double v : m.values.data) CHECK(std::abs(v) <= 2.0 + 0.8 + 1e-12);
  }
  SECTION("autocorrelation peak recovers the dominant period") {
    SeriesMatrix m = gen_sine_mixture(3, 1024, 19, 0.02);
    for (int s = 0; s < 3; ++s) {
      double best = -1e18;
      int best_lag = 0;
      for (int lag = 6; lag <= 40; ++lag) {
        double acf = 0.0;
        for (int t = lag; t < 1024; ++t) acf += m.at(s, t) * m.at(s, t - lag);
        if (acf > best) {
          best = acf;
          best_lag = lag;
        }
      }
      // periods were drawn as integers in [12, 32]
      CHECK(best_lag >= 12);
      CHECK(best_lag <= 32);
      // signal at the peak lag correlates strongly
      double c0 = 0.0, cl = 0.0;
      for (int t = best_lag; t < 1024; ++t) {
        c0 += m.at(s, t) * m.at(s, t);
        cl += m.at(s, t) * m.at(s, t - best_lag);
      }
      CHECK(cl / c0 > 0.9);
    }
  }
}

TEST_CASE("two-regime generator separates observed means") {
  auto [m, switch_t] = gen_two_regime(6, 400, 20);
  CHECK(switch_t == 200);
  int far_apart = 0;
  for (int s = 0; s < 6; ++s) {
    double m1 = 0.0, m2 = 0.0;
    for (int t = 0; t < switch_t; ++t) m1 += m.at(s, t);
    for (int t = switch_t; t < 400; ++t) m2 += m.at(s, t);
    m1 /= switch_t;
    m2 /= 400 - switch_t;
    double sd = 0.0;
    for (int t = 0; t < switch_t; ++t) sd += (m.at(s, t) - m1) * (m.at(s, t) - m1);
    sd = std::sqrt(sd / switch_t);
    if (std::abs(m1 - m2) > 2.0 * sd) ++far_apart;
  }
  CHECK(far_apart >= 3);  // most series shift visibly between regimes
}

TEST_CASE("no leakage: training windows and scaler stats stay in range") {
  auto [m, oracle] = gen_synthetic_latent_var(4, 2, 200, 21);
  SplitPlan plan = rolling_splits(m, 4, 10, 12);
  ScalerState st = fit_scaler(m, "standard", plan.train_end);
  CHECK(st.train_end == plan.train_end);
  SeededRng rng(22);
  for (int rep = 0; rep < 50; ++rep) {
    WindowBatch wb = sample_training_windows(m, 12, 10, 8, plan.train_end, rng);
    for (int s : wb.start_offsets) CHECK(s + 22 <= plan.train_end);
  }
}
