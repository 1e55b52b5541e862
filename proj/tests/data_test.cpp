#include <cmath>
#include <filesystem>
#include <numbers>

#include <gtest/gtest.h>

#include "qdon/data/datagen.hpp"
#include "qdon/errors.hpp"
#include "qdon/io.hpp"

using namespace qdon;

TEST(Grf, EmpiricalCovarianceMatchesKernel) {
  KernelSpec k{KernelKind::kSquaredExponential, 0.3, 1.0};
  std::vector<double> pts{0.0, 0.1, 0.4, 0.9};
  Matrix s = grf_sample(k, pts, 20000, 7);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const double cov = s.col(a).dot(s.col(b)) / s.rows();
      EXPECT_NEAR(cov, k(pts[a], pts[b]), 0.05) << a << "," << b;
    }
}

TEST(Grf, SeedControlsDraws) {
  KernelSpec k;
  auto pts = linspace(0, 1, 30);
  EXPECT_EQ(grf_sample(k, pts, 3, 1), grf_sample(k, pts, 3, 1));
  EXPECT_NE(grf_sample(k, pts, 3, 1), grf_sample(k, pts, 3, 2));
}

TEST(Grf, SmoothPeriodicKernelStillFactorises) {
  KernelSpec k{KernelKind::kExpSineSquared, 1.0, 1.0};
  std::vector<double> grid(100);
  for (int j = 0; j < 100; ++j) grid[j] = j / 100.0;
  EXPECT_NO_THROW(grf_sample(k, grid, 2, 3));
}

TEST(Antiderivative, ConstantAndLinearIntegrandsAreExact) {
  std::vector<double> one(101, 1.0);
  auto u = antiderivative(one, 0.01);
  EXPECT_NEAR(u.back(), 1.0, 1e-13);
  std::vector<double> lin(101);
  for (int i = 0; i <= 100; ++i) lin[i] = 2.0 * i * 0.01;
  auto w = antiderivative(lin, 0.01);
  for (int i = 0; i <= 100; ++i) EXPECT_NEAR(w[i], (i * 0.01) * (i * 0.01), 1e-13);
}

TEST(Advection, CommensurateShiftIsExactCircularShift) {
  std::vector<double> u0(100);
  for (int j = 0; j < 100; ++j) u0[j] = std::sin(2 * std::numbers::pi * j / 100.0) + 0.3 * std::cos(6 * std::numbers::pi * j / 100.0) + 0.01 * (j % 7);
  auto u = advection_solve(u0, 0.25);
  for (int j = 0; j < 100; ++j) EXPECT_NEAR(u[j], u0[(j + 75) % 100], 1e-12);
  auto same = advection_solve(u0, 0.0);
  EXPECT_EQ(same, u0);
}

TEST(Advection, InterpolantIsExactOnGridAndAccurateForSmoothFunctions) {
  std::vector<double> u0(64);
  auto f = [](double x) { return std::exp(std::sin(2 * std::numbers::pi * x)); };
  for (int j = 0; j < 64; ++j) u0[j] = f(j / 64.0);
  PeriodicInterpolant p(u0);
  for (int j = 0; j < 64; ++j) EXPECT_NEAR(p(j / 64.0), u0[j], 1e-13);
  for (double x : {0.013, 0.377, 0.9}) EXPECT_NEAR(p(x), f(x), 1e-12);
  auto shifted = advection_solve(u0, 0.1234);
  for (int j = 0; j < 64; ++j) EXPECT_NEAR(shifted[j], f(j / 64.0 - 0.1234), 1e-12);
}

TEST(Dataset, AntiderivativeTargetsDifferentiateBackToSensors) {
  auto p = DatasetParams::defaults_for(TaskKind::kAntiderivative);
  auto ds = build_operator_dataset(p, 11);
  EXPECT_EQ(ds.scenarios(), 300);
  EXPECT_EQ(ds.branch.cols(), 10);
  EXPECT_EQ(ds.queries.rows(), 100);
  EXPECT_EQ(ds.scenarios_in(SplitKind::kTrain).size(), 200u);
  EXPECT_EQ(ds.scenarios_in(SplitKind::kCal).size(), 50u);
  EXPECT_TRUE(ds.shared_queries());
  const double dx = 1.0 / 99;
  for (int i = 0; i < 10; ++i) {
    const auto& u = ds.targets[i];
    EXPECT_EQ(u[0], 0.0);
    for (int s = 1; s < 9; ++s) {
      const int j = 11 * s;  // sensor s sits on grid point 11 s
      const double deriv = (u[j + 1] - u[j - 1]) / (2 * dx);
      EXPECT_NEAR(deriv, ds.branch(i, s), 2e-2) << i << "," << s;
    }
  }
}

TEST(Dataset, AdvectionDiagonalReturnsInitialValueAtOrigin) {
  auto p = DatasetParams::defaults_for(TaskKind::kAdvection);
  p.n_train = 5;
  p.n_cal = 2;
  p.n_test = 2;
  auto ds = build_operator_dataset(p, 3);
  EXPECT_EQ(ds.d_y, 2);
  EXPECT_EQ(ds.queries.rows(), 2500);
  for (int i = 0; i < ds.scenarios(); ++i) {
    const double u00 = ds.branch(i, 0);
    for (int a = 0; a < 50; ++a) EXPECT_NEAR(ds.targets[i][a * 50 + a], u00, 1e-12);  // x == t
    EXPECT_NEAR(ds.targets[i][49 * 50], u00, 1e-12);  // x = 1, t = 0 wraps around
  }
}

TEST(Dataset, OnlineWindowCount) {
  auto p = DatasetParams::defaults_for(TaskKind::kPointwiseOnline);
  p.signal.signals = 10;
  for (int h : {1, 3}) {
    p.horizon = h;
    auto ds = build_operator_dataset(p, 5);
    EXPECT_EQ(ds.scenarios(), 10 * (100 - 10 - h));
    EXPECT_EQ(ds.query_index[0].size(), 1u);
    EXPECT_NEAR(ds.queries(ds.query_index[0][0], 0), (10 + h) * 0.01, 1e-15);
  }
}

TEST(Dataset, ForecastShapes) {
  auto p = DatasetParams::defaults_for(TaskKind::kForecast);
  auto ds = build_operator_dataset(p, 5);
  EXPECT_EQ(ds.d_u, 11);
  EXPECT_EQ(ds.queries.rows(), p.forecast_points);
  EXPECT_FALSE(ds.scenarios_in(SplitKind::kTest).empty());
}

TEST(Dataset, SaveLoadRoundTripIsLossless) {
  auto dir = std::filesystem::temp_directory_path() / "qdon_data_test";
  std::filesystem::remove_all(dir);
  auto p = DatasetParams::defaults_for(TaskKind::kAntiderivative);
  p.n_train = 4;
  p.n_cal = 2;
  p.n_test = 2;
  auto ds = build_operator_dataset(p, 21);
  save_dataset(ds, dir / "anti");
  auto back = load_dataset(dir / "anti");
  EXPECT_EQ(back.branch, ds.branch);
  EXPECT_EQ(back.queries, ds.queries);
  EXPECT_EQ(back.targets, ds.targets);
  EXPECT_EQ(back.query_index, ds.query_index);
  EXPECT_EQ(back.split, ds.split);
  EXPECT_EQ(back.params, ds.params);

  auto other = build_operator_dataset(p, 22);
  EXPECT_NE(other.branch, ds.branch);

  auto meta = nlohmann::json::parse(read_file(dir / "anti.json"));
  meta["version"] = 99;
  write_file_atomic(dir / "anti.json", meta.dump());
  EXPECT_THROW(load_dataset(dir / "anti"), FormatError);
  EXPECT_THROW(load_dataset(dir / "missing"), MissingInputError);
  std::filesystem::remove_all(dir);
}

TEST(Dataset, SignalSeriesSurviveRoundTrip) {
  auto dir = std::filesystem::temp_directory_path() / "qdon_series_test";
  std::filesystem::remove_all(dir);
  auto p = DatasetParams::defaults_for(TaskKind::kForecast);
  auto ds = build_operator_dataset(p, 8);
  EXPECT_EQ(ds.series.rows(), 32);
  EXPECT_EQ(ds.series.cols(), p.signal.length);
  // Every training window is a slice of some stored training signal.
  const int first = ds.scenarios_in(SplitKind::kTrain).front();
  bool found = false;
  for (Eigen::Index r = 0; r < ds.series.rows() && !found; ++r)
    for (Eigen::Index k = 0; k + ds.d_u <= ds.series.cols() && !found; ++k)
      found = ds.series.row(r).segment(k, ds.d_u) == ds.branch.row(first);
  EXPECT_TRUE(found);
  save_dataset(ds, dir / "fc");
  auto back = load_dataset(dir / "fc");
  EXPECT_EQ(back.series, ds.series);
  std::filesystem::remove_all(dir);
}
