// Command-line front end for the experiment pipeline.
//
//   qdon gen-data    --preset antiderivative
//   qdon train       --config run.json --threads 4
//   qdon calibrate / evaluate / noise-sweep / compare
//
// Every subcommand resolves an ExperimentConfig from --preset or --config and
// works inside the output directory (--output, else $QDON_OUTPUT_DIR, else the
// config's own output_dir).

#include <cstdlib>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "qdon/errors.hpp"
#include "qdon/harness/experiment.hpp"

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kMissing = 3, kNumerical = 4, kCapacity = 5 };

struct Common {
  std::string config_file;
  std::string preset_name;
  std::string output;
  std::optional<int> threads;
  bool oracle = false;
  bool verbose = false;
};

qdon::ExperimentConfig resolve(const Common& c) {
  if (!c.config_file.empty() && !c.preset_name.empty())
    throw qdon::ConfigError("pass either --config or --preset, not both");
  qdon::ExperimentConfig cfg;
  if (!c.config_file.empty())
    cfg = qdon::load_config(c.config_file);
  else
    cfg = qdon::preset(c.preset_name.empty() ? "antiderivative" : c.preset_name);
  if (!c.output.empty()) {
    cfg.output_dir = c.output;
  } else if (const char* env = std::getenv("QDON_OUTPUT_DIR"); env && *env) {
    cfg.output_dir = std::filesystem::path(env) / cfg.name;
  }
  if (c.threads) cfg.threads = *c.threads;
  cfg.validate();
  return cfg;
}

void log_rows(const std::vector<qdon::MetricsRow>& rows) {
  for (const auto& r : rows)
    spdlog::info("{:<16} {:<12} lambda={:<8g} shots={:<7} relL2={:.3f}% coverage={:.2f}% width={:.4g}", r.mode,
                 r.method, r.lambda, r.shots, r.rel_l2_percent, r.coverage_percent, r.avg_width);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum DeepONet ensembles with conformal uncertainty"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_file, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("-p,--preset", common.preset_name, "named preset (see `qdon presets`)");
    sub->add_option("-o,--output", common.output, "output directory");
    sub->add_option("-t,--threads", common.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("-v,--verbose", common.verbose, "debug logging");
  };

  auto* gen = app.add_subcommand("gen-data", "generate the dataset");
  auto* train = app.add_subcommand("train", "train the ensemble and write loss traces");
  auto* calib = app.add_subcommand("calibrate", "fit the conformal threshold on the calibration split");
  auto* eval = app.add_subcommand("evaluate", "score the test split with the stored calibration");
  auto* sweep = app.add_subcommand("noise-sweep", "metrics over the lambda x shots grid");
  auto* compare = app.add_subcommand("compare", "hybrid and superposed-ensemble comparison plus resources");
  auto* presets = app.add_subcommand("presets", "list presets, or print one as JSON");
  auto* run_all = app.add_subcommand("run", "gen-data, train, calibrate and evaluate in one go");
  for (auto* s : {gen, train, calib, eval, sweep, compare, run_all}) add_common(s);
  for (auto* s : {calib, eval, run_all})
    s->add_flag("--oracle", common.oracle, "use the full-register reference simulator (small circuits only)");
  std::string show;
  presets->add_option("name", show, "preset to print");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(common.verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (presets->parsed()) {
      if (show.empty())
        for (const auto& n : qdon::preset_names()) fmt::print("{}\n", n);
      else
        fmt::print("{}\n", qdon::preset(show).to_json().dump(2));
      return kOk;
    }
    const auto cfg = resolve(common);
    const qdon::Paths paths{cfg.output_dir};
    spdlog::debug("config: {}", cfg.to_json().dump());
    spdlog::info("experiment '{}' in {}", cfg.name, paths.root.string());

    if (gen->parsed() || run_all->parsed()) {
      qdon::step_gen_data(cfg, paths);
      spdlog::info("dataset written to {}.*", paths.dataset_stem().string());
    }
    if (train->parsed() || run_all->parsed()) {
      qdon::step_train(cfg, paths);
      spdlog::info("ensemble checkpoint {}", paths.ensemble().string());
    }
    if (calib->parsed() || run_all->parsed()) {
      const auto c = qdon::step_calibrate(cfg, paths, common.oracle);
      spdlog::info("q_hat = {:.6g} from {} scores", c.q_hat, c.scores.size());
    }
    if (eval->parsed() || run_all->parsed()) log_rows(qdon::step_evaluate(cfg, paths, common.oracle));
    if (sweep->parsed()) log_rows(qdon::step_noise_sweep(cfg, paths));
    if (compare->parsed()) {
      log_rows(qdon::step_compare(cfg, paths));
      spdlog::info("resource report {}", paths.resources().string());
    }
    return kOk;
  } catch (const qdon::ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kConfig;
  } catch (const qdon::MissingInputError& e) {
    spdlog::error("missing input: {}", e.what());
    return kMissing;
  } catch (const qdon::NumericalError& e) {
    spdlog::error("numerical failure: {}", e.what());
    return kNumerical;
  } catch (const qdon::CapacityError& e) {
    spdlog::error("capacity exceeded: {}", e.what());
    return kCapacity;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kOther;
  }
}
