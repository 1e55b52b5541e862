#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qdon/errors.hpp"
#include "qdon/opnet/deeponet.hpp"

using namespace qdon;

namespace {

OperatorDataset small_antiderivative(std::uint64_t seed, int n_train = 16) {
  auto p = DatasetParams::defaults_for(TaskKind::kAntiderivative);
  p.d_u = 6;
  p.query_points = 12;
  p.n_train = n_train;
  p.n_cal = 4;
  p.n_test = 4;
  return build_operator_dataset(p, seed);
}

std::vector<std::vector<double>> targets_of(const OperatorDataset& ds, const std::vector<int>& ids) {
  std::vector<std::vector<double>> t;
  for (int i : ids) t.push_back(ds.targets[static_cast<std::size_t>(i)]);
  return t;
}

double dataset_loss(const DeepONetModel& m, const OperatorDataset& ds, LossKind kind) {
  const auto ids = ds.scenarios_in(SplitKind::kTrain);
  return loss(predict_dataset(m, ds, ids), targets_of(ds, ids), kind);
}

std::vector<double> flat(const DeepONetModel& m) {
  std::vector<double> v(flat_size(m.branch) + flat_size(m.trunk));
  pack(m.branch, std::span(v).first(flat_size(m.branch)));
  pack(m.trunk, std::span(v).subspan(flat_size(m.branch)));
  return v;
}

void set_flat(DeepONetModel& m, const std::vector<double>& v) {
  unpack(m.branch, std::span(v).first(flat_size(m.branch)));
  unpack(m.trunk, std::span(v).subspan(flat_size(m.branch)));
}

}  // namespace

TEST(Fourier, FeatureLayout) {
  FourierFeatureSpec spec{{2.0, 5.0}};
  ASSERT_EQ(spec.output_dim(), 5);
  const double t = 0.137;
  const auto f = fourier_features(t, spec);
  ASSERT_EQ(f.size(), 5u);
  EXPECT_DOUBLE_EQ(f[0], t);
  EXPECT_NEAR(f[1], std::cos(2 * std::numbers::pi * 2.0 * t), 1e-15);
  EXPECT_NEAR(f[2], std::sin(2 * std::numbers::pi * 2.0 * t), 1e-15);
  EXPECT_NEAR(f[3], std::cos(2 * std::numbers::pi * 5.0 * t), 1e-15);
  EXPECT_NEAR(f[4], std::sin(2 * std::numbers::pi * 5.0 * t), 1e-15);
}

TEST(Fourier, OriginAndQuarterPeriod) {
  FourierFeatureSpec five{{1, 2, 3, 4, 5}};
  EXPECT_EQ(fourier_features(0.0, five), (std::vector<double>{0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0}));
  const auto f = fourier_features(0.25, FourierFeatureSpec{{1.0}});
  EXPECT_NEAR(f[1], 0.0, 1e-15);
  EXPECT_NEAR(f[2], 1.0, 1e-15);
}

TEST(Fourier, ConstantSignalHasNoPeak) {
  Matrix sig = Matrix::Constant(2, 50, 3.0);
  EXPECT_THROW(dominant_frequencies(sig, 0.1, 1), NumericalError);
}

TEST(Fourier, SingleToneAndAmplitudeOrdering) {
  Matrix one(1, 100), two(1, 100);
  for (int i = 0; i < 100; ++i) {
    const double t = i * 0.01;
    one(0, i) = std::sin(2 * std::numbers::pi * 3 * t);
    two(0, i) = std::sin(2 * std::numbers::pi * 9 * t) + 2 * std::sin(2 * std::numbers::pi * 25 * t);
  }
  EXPECT_NEAR(dominant_frequencies(one, 0.01, 1)[0], 3.0, 1e-12);
  const auto f = dominant_frequencies(two, 0.01, 2);
  EXPECT_NEAR(f[0], 25.0, 1e-12);
  EXPECT_NEAR(f[1], 9.0, 1e-12);
}

TEST(Adam, ConvergesOnOneParameterQuadratic) {
  // f(x) = (x - 3)^2 has its minimum at 3.
  AdamConfig c;
  c.lr = 0.05;
  c.gamma = 0.999;
  c.min_lr = 1e-4;
  Adam opt(c, 1);
  std::vector<double> x{-2.0}, g(1);
  for (int it = 0; it < 20000; ++it) {
    g[0] = 2 * (x[0] - 3.0);
    opt.step(x, g);
  }
  EXPECT_NEAR(x[0], 3.0, 1e-6);
  EXPECT_EQ(opt.iterations(), 20000);
}

TEST(Fourier, DominantFrequenciesRecoverOnBinTones) {
  // 200 samples at dt = 0.01: bin spacing 0.5 Hz, tones sit on bins.
  const int n = 200;
  const double dt = 0.01;
  Matrix sig(3, n);
  for (int r = 0; r < 3; ++r)
    for (int i = 0; i < n; ++i) {
      const double t = i * dt;
      sig(r, i) = 0.3 * r + 2.0 * std::sin(2 * std::numbers::pi * 4.0 * t + r) +
                  1.0 * std::cos(2 * std::numbers::pi * 11.0 * t) + 0.4 * std::sin(2 * std::numbers::pi * 20.0 * t);
    }
  const auto f = dominant_frequencies(sig, dt, 3);
  ASSERT_EQ(f.size(), 3u);
  EXPECT_NEAR(f[0], 4.0, 1e-12);
  EXPECT_NEAR(f[1], 11.0, 1e-12);
  EXPECT_NEAR(f[2], 20.0, 1e-12);
}

TEST(Fourier, TooFewPeaksIsNumericalError) {
  Matrix sig(1, 64);
  for (int i = 0; i < 64; ++i) sig(0, i) = std::sin(2 * std::numbers::pi * 8.0 * i / 64.0);
  EXPECT_THROW(dominant_frequencies(sig, 1.0 / 64.0, 40), NumericalError);
}

TEST(Fourier, ForecastModelUsesSignalFrequencies) {
  auto p = DatasetParams::defaults_for(TaskKind::kForecast);
  auto ds = build_operator_dataset(p, 2);
  DeepONetArch arch;
  arch.fourier_k = 3;
  auto m = make_deeponet(arch, ds, 1);
  ASSERT_TRUE(m.fourier.has_value());
  EXPECT_EQ(m.trunk.normalization.features(), 7);
  for (double f : m.fourier->frequencies) {
    double best = 1e9;
    for (double b : p.signal.base_frequencies) best = std::min(best, std::abs(f - b));
    EXPECT_LT(best, 1.5) << f;  // within spectral resolution of the windows
  }
}

TEST(DeepONet, CachedBranchMatchesIndependentEvaluation) {
  auto ds = small_antiderivative(4);
  DeepONetArch arch{6, 6, 2, false, 5, 0};
  auto m = make_deeponet(arch, ds, 9);
  EXPECT_EQ(m.latent(), 5);
  const Matrix grid = predict_grid(m, ds.branch, ds.queries);
  ASSERT_EQ(grid.rows(), ds.branch.rows());
  for (int i : {0, 3, 7})
    for (int j : {0, 5, 11}) {
      std::vector<double> u(ds.branch.row(i).data(), ds.branch.row(i).data() + ds.d_u);
      std::vector<double> y(ds.queries.row(j).data(), ds.queries.row(j).data() + ds.d_y);
      EXPECT_EQ(predict(m, u, y), grid(i, j));
    }
}

TEST(DeepONet, LossDefinitions) {
  std::vector<std::vector<double>> p{{1, 2}, {0, 0}}, t{{1, 0}, {3, 4}};
  EXPECT_DOUBLE_EQ(loss(p, t, LossKind::kMSE), (4.0 / 2 + 25.0 / 2) / 2.0);
  // Ragged query lists: per-scenario mean first, then over scenarios.
  EXPECT_DOUBLE_EQ(loss({{1}, {0, 0, 0}}, {{0}, {1, 1, 1}}, LossKind::kMSE), 1.0);
  EXPECT_DOUBLE_EQ(loss({{2, 2}}, {{1, 1}}, LossKind::kMSE), 1.0);
  EXPECT_NEAR(loss({{2, 4}}, {{1, 2}}, LossKind::kRelL2), 1.0, 1e-8);
  EXPECT_NEAR(loss(p, t, LossKind::kRelL2), (2.0 / (1.0 + 1e-8) + 5.0 / (5.0 + 1e-8)) / 2.0, 1e-14);
  EXPECT_EQ(loss_from_name("rel_l2"), LossKind::kRelL2);
  EXPECT_THROW(loss_from_name("huber"), ConfigError);
}

TEST(DeepONet, LearningRateScheduleDecaysToFloor) {
  AdamConfig a;
  a.lr = 5e-3;
  a.gamma = 0.99;
  a.min_lr = 5e-4;
  EXPECT_DOUBLE_EQ(a.rate_at(0), 5e-3);
  EXPECT_NEAR(a.rate_at(10), 5e-3 * std::pow(0.99, 10), 1e-18);
  EXPECT_DOUBLE_EQ(a.rate_at(100000), 5e-4);
  AdamConfig flat_rate;
  EXPECT_DOUBLE_EQ(flat_rate.rate_at(12345), 1e-3);
}

// The first Adam step moves every parameter by -lr * sign(gradient) (up to
// eps), so the step direction must agree with finite-difference partials.
class FirstStepGradient : public ::testing::TestWithParam<LossKind> {};

TEST_P(FirstStepGradient, MatchesFiniteDifferenceSigns) {
  auto ds = small_antiderivative(6);
  DeepONetArch arch{5, 5, 2, true, 4, 0};
  const auto m0 = make_deeponet(arch, ds, 3);
  TrainConfig cfg;
  cfg.iterations = 1;
  cfg.loss = GetParam();
  cfg.adam.lr = 1e-6;
  const auto r = train(m0, ds, cfg, 1);
  EXPECT_NEAR(r.trace.loss[0], dataset_loss(m0, ds, cfg.loss), 1e-12);
  const auto th0 = flat(m0), th1 = flat(r.model);
  const double h = 1e-6;
  int checked = 0;
  for (std::size_t k = 0; k < th0.size(); ++k) {
    auto mp = m0, mm = m0;
    auto tp = th0, tm = th0;
    tp[k] += h;
    tm[k] -= h;
    set_flat(mp, tp);
    set_flat(mm, tm);
    const double g = (dataset_loss(mp, ds, cfg.loss) - dataset_loss(mm, ds, cfg.loss)) / (2 * h);
    if (std::abs(g) < 1e-5) continue;
    const double step = (th0[k] - th1[k]) / cfg.adam.lr;
    EXPECT_NEAR(step, g > 0 ? 1.0 : -1.0, 1e-2) << "param " << k << " fd " << g;
    ++checked;
  }
  EXPECT_GT(checked, static_cast<int>(th0.size()) / 2);
}

INSTANTIATE_TEST_SUITE_P(Losses, FirstStepGradient, ::testing::Values(LossKind::kMSE, LossKind::kRelL2));

TEST(DeepONet, TrainingReducesLossAndIsDeterministic) {
  auto ds = small_antiderivative(8, 24);
  DeepONetArch arch{6, 6, 2, false, 6, 0};
  const auto m0 = make_deeponet(arch, ds, 5);
  TrainConfig cfg;
  cfg.iterations = 300;
  cfg.adam.lr = 1e-2;
  const auto a = train(m0, ds, cfg, 17);
  const auto b = train(m0, ds, cfg, 17);
  EXPECT_LT(dataset_loss(a.model, ds, LossKind::kMSE), 0.5 * dataset_loss(m0, ds, LossKind::kMSE));
  EXPECT_EQ(flat(a.model), flat(b.model));
  EXPECT_EQ(a.trace.loss, b.trace.loss);
}

TEST(DeepONet, MiniBatchesUseSeed) {
  auto ds = small_antiderivative(8, 24);
  DeepONetArch arch{5, 5, 1, false, 4, 0};
  const auto m0 = make_deeponet(arch, ds, 5);
  TrainConfig cfg;
  cfg.iterations = 20;
  cfg.batch_scenarios = 8;
  cfg.batch_queries = 5;
  const auto a = train(m0, ds, cfg, 1), b = train(m0, ds, cfg, 2);
  EXPECT_NE(a.trace.loss, b.trace.loss);
  EXPECT_EQ(a.trace.loss, train(m0, ds, cfg, 1).trace.loss);
}

TEST(DeepONet, PointwiseOnlineTaskTrains) {
  auto p = DatasetParams::defaults_for(TaskKind::kPointwiseOnline);
  auto ds = build_operator_dataset(p, 3);
  ASSERT_FALSE(ds.shared_queries());
  DeepONetArch arch{5, 5, 1, false, 4, 0};
  const auto m0 = make_deeponet(arch, ds, 2);
  TrainConfig cfg;
  cfg.iterations = 100;
  cfg.adam.lr = 1e-2;
  cfg.batch_scenarios = 64;
  const auto r = train(m0, ds, cfg, 4);
  EXPECT_LT(dataset_loss(r.model, ds, LossKind::kMSE), dataset_loss(m0, ds, LossKind::kMSE));
}

TEST(DeepONet, NonFiniteLossIsReported) {
  auto ds = small_antiderivative(8);
  ds.targets[static_cast<std::size_t>(ds.scenarios_in(SplitKind::kTrain)[0])][0] = std::nan("");
  DeepONetArch arch{5, 5, 1, false, 4, 0};
  const auto m0 = make_deeponet(arch, ds, 5);
  TrainConfig cfg;
  cfg.iterations = 3;
  EXPECT_THROW(train(m0, ds, cfg, 1), NumericalError);
}

TEST(DeepONet, FourierRequiresScalarQueries) {
  auto p = DatasetParams::defaults_for(TaskKind::kAdvection);
  p.n_train = 4;
  p.n_cal = 1;
  p.n_test = 1;
  p.query_points = 4;
  auto ds = build_operator_dataset(p, 1);
  DeepONetArch arch;
  arch.fourier_k = 2;
  EXPECT_THROW(make_deeponet(arch, ds, 1), ConfigError);
}
