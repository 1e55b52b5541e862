#include <algorithm>
#include <filesystem>
#include <limits>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "qdon/errors.hpp"
#include "qdon/harness/experiment.hpp"
#include "qdon/io.hpp"

using namespace qdon;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("qdon_harness_" + name);
  fs::remove_all(p);
  return p;
}

// Tiny versions of each task so a whole pipeline runs in well under a second.
ExperimentConfig tiny(const std::string& preset_name) {
  nlohmann::json j = {{"preset", preset_name},
                      {"ensemble", {{"members", 3}}},
                      {"training", {{"iterations", 40}}},
                      {"noise", {{"lambdas", {4e-4}}, {"shots", {500}}, {"query_stride", 4}, {"max_scenarios", 3}}}};
  if (preset_name == "antiderivative" || preset_name == "antiderivative_w5")
    j["dataset"] = {{"n_train", 12}, {"n_cal", 6}, {"n_test", 6}, {"query_points", 16}};
  else if (preset_name == "advection")
    j["dataset"] = {{"n_train", 10}, {"n_cal", 5}, {"n_test", 5}, {"query_points", 6}, {"resolution", 40}};
  else
    j["dataset"] = {{"signal", {{"signals", 20}}}};
  if (preset_name == "advection") j["architecture"] = {{"layers", 2}, {"branch_width", 6}, {"trunk_width", 6}, {"latent", 6}};
  if (preset_name == "offline_v2v" || preset_name == "offline_v2p")
    j["architecture"] = {{"layers", 2}, {"branch_width", 6}, {"trunk_width", 6}, {"latent", 6}};
  return config_from_json(j);
}

std::string slurp(const fs::path& p) { return read_file(p); }

}  // namespace

TEST(Config, EveryPresetValidatesAndRoundTrips) {
  for (const auto& name : preset_names()) {
    const auto cfg = preset(name);
    EXPECT_NO_THROW(cfg.validate()) << name;
    const auto again = config_from_json(cfg.to_json());
    EXPECT_EQ(again.to_json(), cfg.to_json()) << name;
  }
}

TEST(Config, TableRowsAreMirrored) {
  const auto ad = preset("antiderivative");
  EXPECT_EQ(ad.dataset.d_u, 10);
  EXPECT_EQ(ad.arch.layers, 2);
  EXPECT_EQ(ad.arch.branch_width, 10);
  EXPECT_EQ(ad.members, 8);
  EXPECT_EQ(ad.training.iterations, 30000);
  EXPECT_EQ(ad.training.batch_scenarios, 0);

  const auto adv = preset("advection");
  EXPECT_EQ(adv.arch.layers, 7);
  EXPECT_TRUE(adv.arch.residual);
  EXPECT_EQ(adv.training.iterations, 40000);
  ASSERT_TRUE(adv.training.adam.gamma.has_value());
  EXPECT_DOUBLE_EQ(*adv.training.adam.gamma, 0.99);

  const auto v2p = preset("offline_v2p");
  EXPECT_EQ(v2p.training.loss, LossKind::kRelL2);
  EXPECT_EQ(v2p.training.batch_scenarios, 64);
  EXPECT_EQ(v2p.arch.fourier_k, 5);

  const auto online = preset("online_v2v");
  EXPECT_EQ(online.members, 4);
  EXPECT_EQ(online.arch.branch_width, 5);
  EXPECT_DOUBLE_EQ(online.training.adam.lr, 1e-2);
}

TEST(Config, OverridesMergeOntoThePreset) {
  const auto cfg = config_from_json({{"preset", "advection"}, {"training", {{"iterations", 7}}}, {"seed", 99}});
  EXPECT_EQ(cfg.training.iterations, 7);
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_EQ(cfg.arch.layers, 7);  // untouched field keeps the preset value
}

TEST(Config, RejectsBadInputWithPreciseErrors) {
  EXPECT_THROW(config_from_json({{"preset", "nope"}}), ConfigError);
  EXPECT_THROW(config_from_json({{"trainig", {{"iterations", 1}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"conformal", {{"alpha", 1.5}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"noise", {{"lambdas", {-0.1}}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"ensemble", {{"mode", "bagged"}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"training", {{"iterations", "many"}}}}), ConfigError);
  try {
    config_from_json({{"architecture", {{"widht", 3}}}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("widht"), std::string::npos);
  }
}

TEST(Config, LoadsFileWithComments) {
  const auto dir = scratch("cfgfile");
  fs::create_directories(dir);
  std::ofstream(dir / "c.json") << "{\n  // smaller run\n  \"preset\": \"online_v2v\", \"name\": \"x\"\n}\n";
  EXPECT_EQ(load_config(dir / "c.json").name, "x");
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
}

TEST(Metrics, AppendOnlyWithSingleHeader) {
  const auto dir = scratch("metrics");
  MetricsRow r;
  r.experiment = "e";
  r.mode = "independent";
  r.method = "exact";
  r.q_hat = std::numeric_limits<double>::infinity();
  append_metrics(dir / "m.csv", {r});
  r.shots = 100;
  append_metrics(dir / "m.csv", {r});
  std::istringstream in(slurp(dir / "m.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 3);
  EXPECT_EQ(slurp(dir / "m.csv").rfind(metrics_header(), 0), 0u);
  EXPECT_NE(metrics_line(r).find(",inf\n"), std::string::npos);
}

TEST(Metrics, CappedKeepsPrefix) {
  EXPECT_EQ(capped({4, 5, 6}, 2), (std::vector<int>{4, 5}));
  EXPECT_EQ(capped({4, 5, 6}, 0), (std::vector<int>{4, 5, 6}));
}

class Pipeline : public ::testing::TestWithParam<std::string> {};

TEST_P(Pipeline, ComposesForEveryTask) {
  const auto cfg = tiny(GetParam());
  const Paths p{scratch("pipe_" + GetParam())};
  step_gen_data(cfg, p);
  step_train(cfg, p);
  const auto cal = step_calibrate(cfg, p, false);
  EXPECT_GT(cal.scores.size(), 0u);
  const auto rows = step_evaluate(cfg, p, false);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_GE(rows[0].coverage_percent, 0.0);
  EXPECT_LE(rows[0].coverage_percent, 100.0);
  EXPECT_GE(rows[0].avg_width, 0.0);
  EXPECT_TRUE(fs::exists(p.traces() / "member_0.csv"));
  EXPECT_TRUE(fs::exists(p.timings()));
}

INSTANTIATE_TEST_SUITE_P(Tasks, Pipeline,
                         ::testing::Values("antiderivative", "advection", "offline_v2v", "offline_v2p", "online_v2v"));

TEST(Pipeline, StepsReportMissingInputs) {
  const auto cfg = tiny("antiderivative");
  const Paths p{scratch("missing")};
  EXPECT_THROW(step_train(cfg, p), MissingInputError);
  step_gen_data(cfg, p);
  EXPECT_THROW(step_calibrate(cfg, p, false), MissingInputError);
  step_train(cfg, p);
  EXPECT_THROW(step_evaluate(cfg, p, false), MissingInputError);
}

TEST(Pipeline, RepeatedRunsGiveByteIdenticalArtifacts) {
  auto cfg = tiny("antiderivative_w5");
  std::string metrics[2], ensemble[2], resources[2];
  for (int run = 0; run < 2; ++run) {
    cfg.threads = run == 0 ? 1 : 3;  // thread count must not matter either
    const Paths p{scratch("det" + std::to_string(run))};
    step_gen_data(cfg, p);
    step_train(cfg, p);
    step_calibrate(cfg, p, false);
    step_evaluate(cfg, p, false);
    step_noise_sweep(cfg, p);
    step_compare(cfg, p);
    metrics[run] = slurp(p.metrics());
    ensemble[run] = slurp(p.ensemble());
    resources[run] = slurp(p.resources());
  }
  EXPECT_EQ(metrics[0], metrics[1]);
  EXPECT_EQ(ensemble[0], ensemble[1]);
  EXPECT_EQ(resources[0], resources[1]);
  // exact row + 1 sweep cell + 4 modes in the comparison
  EXPECT_EQ(std::count(metrics[0].begin(), metrics[0].end(), '\n'), 1 + 1 + 1 + 4);
}

TEST(Pipeline, DegenerateNoiseRowsEqualExactRows) {
  auto cfg = tiny("antiderivative");
  cfg.noise.lambdas = {0.0};
  cfg.noise.shots = {0};  // exact outcome probabilities
  cfg.noise.readout_flip = 0.0;
  cfg.noise.query_stride = 1;
  cfg.noise.max_scenarios = 0;
  const Paths p{scratch("degenerate")};
  step_gen_data(cfg, p);
  step_train(cfg, p);
  step_calibrate(cfg, p, false);
  const auto exact = step_evaluate(cfg, p, false).front();
  const auto noisy = step_noise_sweep(cfg, p).front();
  EXPECT_NEAR(noisy.rel_l2_percent, exact.rel_l2_percent, 1e-9);
  EXPECT_NEAR(noisy.coverage_percent, exact.coverage_percent, 1e-9);
  EXPECT_NEAR(noisy.avg_width, exact.avg_width, 1e-9);
  EXPECT_NEAR(noisy.q_hat, exact.q_hat, 1e-9);
  EXPECT_EQ(noisy.shots, -1);
}

TEST(Pipeline, OracleCalibrationMatchesFastPath) {
  auto cfg = tiny("antiderivative_w5");
  cfg.dataset.n_cal = 2;
  cfg.dataset.query_points = 4;
  const Paths p{scratch("oracle")};
  step_gen_data(cfg, p);
  step_train(cfg, p);
  const auto fast = step_calibrate(cfg, p, false);
  const auto slow = step_calibrate(cfg, p, true);
  ASSERT_EQ(fast.scores.size(), slow.scores.size());
  for (std::size_t i = 0; i < fast.scores.size(); ++i) EXPECT_NEAR(fast.scores[i], slow.scores[i], 1e-6 * (1 + fast.scores[i]));
}

TEST(Cell, NoisyCellReportsItsGridPoint) {
  const auto cfg = tiny("antiderivative_w5");
  const Paths p{scratch("cell")};
  step_gen_data(cfg, p);
  step_train(cfg, p);
  const auto ds = load_dataset(p.dataset_stem());
  const auto ens = load_ensemble(p.ensemble());
  const auto spec = noisy_spec(cfg.noise, 6e-4, 2000, 5, 1);
  const auto cal = capped(ds.scenarios_in(SplitKind::kCal), 2);
  const auto test = capped(ds.scenarios_in(SplitKind::kTest), 2);
  const auto cell = evaluate_cell(ens, ds, cal, test, spec, ConformalSettings{}, "c");
  EXPECT_DOUBLE_EQ(cell.row.lambda, 6e-4);
  EXPECT_EQ(cell.row.shots, 2000);
  EXPECT_EQ(cell.row.method, "multinomial");
  EXPECT_LT(cell.row.retained_fraction, 1.0);
  EXPECT_GT(cell.row.retained_fraction, 0.9);
}
