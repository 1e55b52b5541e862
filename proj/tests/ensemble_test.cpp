#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "qdon/ensemble/ensemble.hpp"
#include "qdon/errors.hpp"
#include "qdon/io.hpp"
#include "qdon/unary/layers.hpp"
#include "test_util.hpp"

using namespace qdon;

namespace {

OperatorDataset tiny_dataset() {
  auto p = DatasetParams::defaults_for(TaskKind::kAntiderivative);
  p.d_u = 5;
  p.query_points = 12;
  p.n_train = 16;
  p.n_cal = 4;
  p.n_test = 4;
  return build_operator_dataset(p, 31);
}

Ensemble tiny_ensemble(const OperatorDataset& ds, int L, int threads = 1) {
  DeepONetArch arch{5, 5, 2, false, 5, 0};
  TrainConfig cfg;
  cfg.iterations = 40;
  cfg.adam.lr = 5e-3;
  EnsembleTrainOptions opt;
  opt.members = L;
  opt.base_seed = 77;
  opt.threads = threads;
  return train_ensemble(arch, ds, cfg, opt);
}

std::vector<double> flat(const DeepONetModel& m) {
  std::vector<double> v(flat_size(m.branch) + flat_size(m.trunk));
  pack(m.branch, std::span(v).first(flat_size(m.branch)));
  pack(m.trunk, std::span(v).subspan(flat_size(m.branch)));
  return v;
}

double max_abs_diff(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a[i].size(); ++k) d = std::max(d, std::abs(a[i][k] - b[i][k]));
  return d;
}

}  // namespace

TEST(Aggregate, HandCasesAndBruteForce) {
  std::vector<double> same(5, 2.5);
  EXPECT_EQ(aggregate(same).mu, 2.5);
  EXPECT_EQ(aggregate(same).sigma, 0.0);
  const std::vector<double> two{0.0, 2.0};
  EXPECT_EQ(aggregate(two).mu, 1.0);
  EXPECT_EQ(aggregate(two).sigma, 1.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> v(1 + t);
    for (auto& x : v) x = g(rng);
    long double s = 0, s2 = 0;
    for (double x : v) s += x;
    const long double mean = s / v.size();
    for (double x : v) s2 += (x - mean) * (x - mean);
    const auto a = aggregate(v);
    EXPECT_NEAR(a.mu, static_cast<double>(mean), 1e-14);
    EXPECT_NEAR(a.sigma, std::sqrt(static_cast<double>(s2 / v.size())), 1e-14);
    // Affine map: mu follows it, sigma scales by |c|.
    std::vector<double> w(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) w[i] = -3.0 * v[i] + 4.0;
    EXPECT_NEAR(aggregate(w).mu, -3.0 * a.mu + 4.0, 1e-12);
    EXPECT_NEAR(aggregate(w).sigma, 3.0 * a.sigma, 1e-12);
  }
  EXPECT_THROW(aggregate(std::vector<double>{}), ShapeError);
}

TEST(HybridCost, DirectSubstitution) {
  const auto c = hybrid_cost(1, 2500, 20);
  EXPECT_DOUBLE_EQ(c.branch_term, 400.0);
  EXPECT_NEAR(c.query_term, 2500.0 * 20.0 * std::log2(20.0), 1e-9);
  EXPECT_DOUBLE_EQ(c.classical_baseline, 1e6);
  EXPECT_LT(c.hybrid_total(), c.classical_baseline);
  EXPECT_EQ(hybrid_cost(10, 0, 20).query_term, 0.0);
  EXPECT_THROW(hybrid_cost(1, 1, 0), ConfigError);
}

TEST(Ensemble, TrainingSeedsAndThreadInvariance) {
  const auto ds = tiny_dataset();
  const auto one = tiny_ensemble(ds, 1);
  ASSERT_EQ(one.size(), 1);
  const auto three = tiny_ensemble(ds, 3);
  const auto threaded = tiny_ensemble(ds, 3, 3);
  EXPECT_NE(three.seeds[0], three.seeds[1]);
  EXPECT_NE(three.seeds[1], three.seeds[2]);
  for (int m = 0; m < 3; ++m) EXPECT_EQ(flat(three.members[m]), flat(threaded.members[m]));
  EXPECT_EQ(flat(one.members[0]), flat(three.members[0]));
  EXPECT_NE(flat(three.members[0]), flat(three.members[1]));
  // Negative control: forcing the same seed reproduces the same member.
  TrainConfig cfg;
  cfg.iterations = 40;
  cfg.adam.lr = 5e-3;
  const auto again = train(make_deeponet(three.arch, ds, three.seeds[1]), ds, cfg, three.seeds[1]).model;
  EXPECT_EQ(flat(again), flat(three.members[1]));
}

TEST(Ensemble, HybridConfigureOnlyAcceptsSides) {
  Ensemble e;
  EXPECT_EQ(hybrid_configure(e, EnsembleMode::kClassicalTrunk).mode, EnsembleMode::kClassicalTrunk);
  EXPECT_THROW(hybrid_configure(e, EnsembleMode::kSPQC), ConfigError);
  EXPECT_EQ(mode_from_name("classical_branch"), EnsembleMode::kClassicalBranch);
  EXPECT_THROW(mode_from_name("shared"), ConfigError);
}

TEST(SPQC, SingleMemberIsTheStandardCircuit) {
  std::mt19937_64 rng(5);
  const auto layout = pyramid_layout(5, 5);
  const auto th = testutil::random_angles(layout.angle_count(), rng);
  const auto x = testutil::random_unit(5, rng);
  EXPECT_EQ(to_text(spqc_build(layout, {th}, {x})), to_text(tomography_circuit(layout, th, x)));
  EXPECT_EQ(address_bits_for(1), 0);
  EXPECT_EQ(address_bits_for(4), 2);
  EXPECT_EQ(address_bits_for(5), 3);
}

class SPQCNoiseless : public ::testing::TestWithParam<std::tuple<int, int>> {};

TEST_P(SPQCNoiseless, PerMemberOutputsMatchIndependentSimulations) {
  const auto [L, n] = GetParam();
  std::mt19937_64 rng(100 + 10 * L + n);
  const auto layout = pyramid_layout(n, n);
  std::vector<std::vector<double>> th, xs;
  for (int j = 0; j < L; ++j) {
    th.push_back(testutil::random_angles(layout.angle_count(), rng));
    xs.push_back(testutil::random_unit(n, rng));
  }
  const auto c = spqc_build(layout, th, xs);
  EXPECT_EQ(c.total_qubits(), n + 1 + address_bits_for(L));
  const NoiseProfile ideal;
  for (bool full : {false, true}) {
    const auto est = spqc_execute(c, L, n, ideal, 1, SamplingMethod::kMultinomial, full);
    for (int j = 0; j < L; ++j) {
      const auto ref = noisy_layer_forward(layout, th[static_cast<std::size_t>(j)], xs[static_cast<std::size_t>(j)],
                                           ideal, 0);
      std::vector<double> wx(xs[static_cast<std::size_t>(j)]);
      wx.resize(static_cast<std::size_t>(layout.width), 0.0);
      std::rotate(wx.rbegin(), wx.rbegin() + (layout.width - n), wx.rend());
      apply_pyramid(layout, th[static_cast<std::size_t>(j)], wx);
      for (int k = 0; k < n; ++k) {
        EXPECT_NEAR(est[static_cast<std::size_t>(j)].y[static_cast<std::size_t>(k)],
                    ref.y[static_cast<std::size_t>(k)], 1e-8);
        EXPECT_NEAR(est[static_cast<std::size_t>(j)].y[static_cast<std::size_t>(k)],
                    wx[static_cast<std::size_t>(layout.width - n + k)], 1e-8);
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Grid, SPQCNoiseless,
                         ::testing::Combine(::testing::Values(2, 3, 4), ::testing::Values(3, 5)));

TEST(SPQC, DepthBelowSequentialExecution) {
  std::mt19937_64 rng(8);
  const auto layout = pyramid_layout(5, 5);
  std::vector<std::vector<double>> th, xs;
  for (int j = 0; j < 4; ++j) {
    th.push_back(testutil::random_angles(layout.angle_count(), rng));
    xs.push_back(testutil::random_unit(5, rng));
  }
  const auto single = circuit_resources(tomography_circuit(layout, th[0], xs[0]), "single");
  const auto sup = circuit_resources(spqc_build(layout, th, xs), "spqc");
  EXPECT_GT(sup.basis.depth, single.basis.depth);
  EXPECT_LT(sup.basis.depth, 4 * single.basis.depth);
  EXPECT_EQ(sup.qubits, single.qubits + 2);
  EXPECT_EQ(sup.to_json()["qubits"], sup.qubits);
}

TEST(SPQC, SampledExecutionIsSeededAndSplitsShots) {
  std::mt19937_64 rng(9);
  const auto layout = pyramid_layout(3, 3);
  std::vector<std::vector<double>> th, xs;
  for (int j = 0; j < 4; ++j) {
    th.push_back(testutil::random_angles(layout.angle_count(), rng));
    xs.push_back(testutil::random_unit(3, rng));
  }
  const auto c = spqc_build(layout, th, xs);
  auto noise = NoiseProfile::depolarizing(1e-3, 0.0, 400000);
  const auto a = spqc_execute(c, 4, 3, noise, 7), b = spqc_execute(c, 4, 3, noise, 7), d = spqc_execute(c, 4, 3, noise, 8);
  EXPECT_EQ(a[2].y, b[2].y);
  EXPECT_NE(a[2].y, d[2].y);
  noise.shots.reset();
  const auto exact = spqc_execute(c, 4, 3, noise, 0);
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(a[static_cast<std::size_t>(j)].y[static_cast<std::size_t>(k)],
                                            exact[static_cast<std::size_t>(j)].y[static_cast<std::size_t>(k)], 0.02);
}

TEST(Evaluate, NoiselessCircuitsReproduceExactPredictionsInEveryMode) {
  const auto ds = tiny_dataset();
  const auto ens = tiny_ensemble(ds, 2);
  const auto test = ds.scenarios_in(SplitKind::kTest);
  InferenceSpec exact;
  const auto ref = evaluate_ensemble(ens, ds, test, exact);
  EXPECT_EQ(ref.circuits, 0);
  InferenceSpec circ;
  circ.force_circuits = true;
  for (auto mode : {EnsembleMode::kIndependent, EnsembleMode::kClassicalBranch, EnsembleMode::kClassicalTrunk,
                    EnsembleMode::kSPQC}) {
    Ensemble e = ens;
    e.mode = mode;
    const auto out = evaluate_ensemble(e, ds, test, circ);
    EXPECT_GT(out.circuits, 0) << mode_name(mode);
    EXPECT_LT(max_abs_diff(out.mu, ref.mu), 1e-9) << mode_name(mode);
    EXPECT_LT(max_abs_diff(out.sigma, ref.sigma), 1e-9) << mode_name(mode);
    EXPECT_NEAR(out.retained_fraction, 1.0, 1e-12);
  }
}

TEST(Evaluate, NoisyEvaluationIsSeededAndThreadInvariant) {
  const auto ds = subsample_queries(tiny_dataset(), 3);
  const auto ens = tiny_ensemble(ds, 2);
  const auto test = ds.scenarios_in(SplitKind::kTest);
  InferenceSpec spec;
  spec.noise = NoiseProfile::depolarizing(4e-4, 0.01, 5000);
  spec.seed = 12;
  const auto a = evaluate_ensemble(ens, ds, test, spec);
  spec.threads = 3;
  const auto b = evaluate_ensemble(ens, ds, test, spec);
  EXPECT_EQ(a.members, b.members);
  EXPECT_LT(a.retained_fraction, 1.0);
  spec.seed = 13;
  EXPECT_NE(evaluate_ensemble(ens, ds, test, spec).members, a.members);
  // Ideal profile plus a huge budget approaches the exact predictions.
  spec.noise = NoiseProfile{};
  spec.noise.shots = 100000000;
  const auto exact = evaluate_ensemble(ens, ds, test, InferenceSpec{});
  EXPECT_LT(max_abs_diff(evaluate_ensemble(ens, ds, test, spec).mu, exact.mu), 5e-3);
}

TEST(Evaluate, SubsampleKeepsAlignment) {
  const auto ds = tiny_dataset();
  const auto sub = subsample_queries(ds, 5);
  EXPECT_EQ(sub.query_index[0], (std::vector<int>{ds.query_index[0][0], ds.query_index[0][5], ds.query_index[0][10]}));
  EXPECT_EQ(sub.targets[2][1], ds.targets[2][5]);
}

TEST(Checkpoint, RoundTripPreservesPredictions) {
  const auto ds = tiny_dataset();
  auto ens = tiny_ensemble(ds, 2);
  ens.mode = EnsembleMode::kClassicalBranch;
  const auto file = std::filesystem::temp_directory_path() / "qdon_ens_ckpt.json";
  save_ensemble(ens, file);
  const auto back = load_ensemble(file);
  EXPECT_EQ(back.mode, ens.mode);
  EXPECT_EQ(back.seeds, ens.seeds);
  const auto ids = ds.scenarios_in(SplitKind::kTest);
  EXPECT_EQ(evaluate_ensemble(back, ds, ids, {}).mu, evaluate_ensemble(ens, ds, ids, {}).mu);
  write_file_atomic(file, "{\"format\": \"qdon-ensemble\", \"version\": 1}");
  EXPECT_THROW(load_ensemble(file), FormatError);
  std::filesystem::remove(file);
}
