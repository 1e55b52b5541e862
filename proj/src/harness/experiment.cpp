#include "qdon/harness/experiment.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "qdon/errors.hpp"
#include "qdon/io.hpp"
#include "qdon/rng.hpp"
#include "qdon/unary/layers.hpp"

namespace qdon {

namespace {

const char* method_name(SamplingMethod m) { return m == SamplingMethod::kTrajectory ? "trajectory" : "multinomial"; }

SamplingMethod method_from_name(const std::string& s) {
  if (s == "multinomial") return SamplingMethod::kMultinomial;
  if (s == "trajectory") return SamplingMethod::kTrajectory;
  throw ConfigError(fmt::format("unknown sampling method '{}'", s));
}

void reject_unknown(const nlohmann::json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(fmt::format("'{}' must be an object", section));
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError(fmt::format("unknown key '{}' in '{}'", k, section));
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (members < 1) fail("ensemble.members must be at least 1");
  if (threads < 1) fail("ensemble.threads must be at least 1");
  if (arch.layers < 1 || arch.branch_width < 1 || arch.trunk_width < 1 || arch.latent < 1)
    fail("architecture sizes must be positive");
  if (arch.fourier_k < 0) fail("architecture.fourier_k must be non-negative");
  if (arch.fourier_k > 0 && (dataset.task == TaskKind::kAdvection))
    fail("Fourier features need a one-dimensional trunk input");
  if (training.iterations < 0) fail("training.iterations must be non-negative");
  if (!(training.adam.lr > 0)) fail("training.lr must be positive");
  if (training.adam.min_lr && *training.adam.min_lr > training.adam.lr) fail("training.min_lr exceeds training.lr");
  if (training.adam.gamma && !(*training.adam.gamma > 0 && *training.adam.gamma <= 1))
    fail("training.gamma must lie in (0, 1]");
  if (training.batch_scenarios < 0 || training.batch_queries < 0) fail("batch sizes must be non-negative");
  if (!(conformal.alpha > 0 && conformal.alpha < 1)) fail("conformal.alpha must lie in (0, 1)");
  if (!(conformal.epsilon > 0)) fail("conformal.epsilon must be positive");
  for (double l : noise.lambdas)
    if (!(l >= 0 && l <= 1)) fail(fmt::format("noise lambda {} outside [0, 1]", l));
  for (auto s : noise.shots)
    if (s < 0) fail("noise shots must be non-negative (0 means exact probabilities)");
  if (!(noise.readout_flip >= 0 && noise.readout_flip <= 0.5)) fail("noise.readout must lie in [0, 0.5]");
  if (noise.query_stride < 1) fail("noise.query_stride must be at least 1");
  if (dataset.d_u < 1) fail("dataset.d_u must be positive");
}

nlohmann::json ExperimentConfig::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"name", name},
          {"seed", seed},
          {"output_dir", output_dir.string()},
          {"dataset", dataset.to_json()},
          {"architecture",
           {{"branch_width", arch.branch_width},
            {"trunk_width", arch.trunk_width},
            {"layers", arch.layers},
            {"residual", arch.residual},
            {"latent", arch.latent},
            {"fourier_k", arch.fourier_k}}},
          {"ensemble", {{"members", members}, {"mode", mode_name(mode)}, {"threads", threads}}},
          {"training",
           {{"iterations", training.iterations},
            {"lr", training.adam.lr},
            {"min_lr", opt(training.adam.min_lr)},
            {"gamma", opt(training.adam.gamma)},
            {"beta1", training.adam.beta1},
            {"beta2", training.adam.beta2},
            {"eps", training.adam.eps},
            {"loss", training.loss == LossKind::kMSE ? "mse" : "rel_l2"},
            {"batch_scenarios", training.batch_scenarios},
            {"batch_queries", training.batch_queries}}},
          {"noise",
           {{"lambdas", noise.lambdas},
            {"shots", noise.shots},
            {"readout", noise.readout_flip},
            {"two_qubit_scale", noise.two_qubit_scale},
            {"method", method_name(noise.method)},
            {"query_stride", noise.query_stride},
            {"max_scenarios", noise.max_scenarios}}},
          {"conformal",
           {{"alpha", conformal.alpha},
            {"epsilon", conformal.epsilon},
            {"peak", conformal.peak == PeakMode::kFullWidth ? "full_width" : "half_width"}}}};
}

std::vector<std::string> preset_names() {
  return {"antiderivative", "antiderivative_w5", "advection", "offline_v2v", "offline_v2p", "online_v2v"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  c.output_dir = std::filesystem::path("qdon_out") / name;
  auto arch = [](int width, int layers, bool residual, int fourier) {
    return DeepONetArch{width, width, layers, residual, width, fourier};
  };
  if (name == "antiderivative" || name == "antiderivative_w5") {
    c.dataset = DatasetParams::defaults_for(TaskKind::kAntiderivative);
    c.training.iterations = 30000;
    c.training.adam.lr = 1e-3;
    if (name == "antiderivative") {
      c.arch = arch(10, 2, false, 0);
      c.members = 8;
    } else {
      c.dataset.d_u = 5;
      c.arch = arch(5, 2, false, 0);
      c.members = 4;
    }
  } else if (name == "advection") {
    c.dataset = DatasetParams::defaults_for(TaskKind::kAdvection);
    c.arch = arch(20, 7, true, 0);
    c.members = 8;
    c.training.iterations = 40000;
    c.training.adam.lr = 1e-3;
    c.training.adam.min_lr = 5e-4;
    c.training.adam.gamma = 0.99;
  } else if (name == "offline_v2v" || name == "offline_v2p") {
    c.dataset = DatasetParams::defaults_for(TaskKind::kForecast);
    c.dataset.d_u = 20;
    // Five extractable tones so the K = 5 Fourier trunk has something to find.
    c.dataset.signal.base_frequencies = {2.0, 5.0, 9.0, 14.0, 20.0};
    c.arch = arch(20, 6, true, 5);
    c.members = 8;
    c.training.iterations = 40000;
    if (name == "offline_v2v") {
      c.training.batch_scenarios = 256;
      c.training.adam.lr = 5e-4;
    } else {
      c.training.batch_scenarios = 64;
      c.training.adam.lr = 5e-3;
      c.training.adam.min_lr = 5e-4;
      c.training.adam.gamma = 0.99;
      c.training.loss = LossKind::kRelL2;
    }
  } else if (name == "online_v2v") {
    c.dataset = DatasetParams::defaults_for(TaskKind::kPointwiseOnline);
    c.dataset.d_u = 5;
    c.arch = arch(5, 2, false, 0);
    c.members = 4;
    c.training.iterations = 15000;
    c.training.batch_scenarios = 256;
    c.training.adam.lr = 1e-2;
  } else {
    throw ConfigError(fmt::format("unknown preset '{}' (known: {})", name, fmt::join(preset_names(), ", ")));
  }
  return c;
}

ExperimentConfig config_from_json(const nlohmann::json& user) {
  reject_unknown(user, "config",
                 {"preset", "name", "seed", "output_dir", "dataset", "architecture", "ensemble", "training", "noise",
                  "conformal"});
  const std::string base_name = user.value("preset", "antiderivative");
  ExperimentConfig base = preset(base_name);
  nlohmann::json j = base.to_json();
  nlohmann::json patch = user;
  patch.erase("preset");
  j.merge_patch(patch);
  ExperimentConfig c = base;
  try {
    c.name = j.at("name").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.output_dir = j.at("output_dir").get<std::string>();
    c.dataset = DatasetParams::from_json(j.at("dataset"));

    const auto& a = j.at("architecture");
    reject_unknown(a, "architecture", {"branch_width", "trunk_width", "layers", "residual", "latent", "fourier_k"});
    c.arch = {a.at("branch_width"), a.at("trunk_width"), a.at("layers"), a.at("residual"), a.at("latent"),
              a.at("fourier_k")};

    const auto& e = j.at("ensemble");
    reject_unknown(e, "ensemble", {"members", "mode", "threads"});
    c.members = e.at("members");
    c.mode = mode_from_name(e.at("mode").get<std::string>());
    c.threads = e.at("threads");

    const auto& t = j.at("training");
    reject_unknown(t, "training",
                   {"iterations", "lr", "min_lr", "gamma", "beta1", "beta2", "eps", "loss", "batch_scenarios",
                    "batch_queries"});
    c.training.iterations = t.at("iterations");
    c.training.adam.lr = t.at("lr");
    c.training.adam.beta1 = t.at("beta1");
    c.training.adam.beta2 = t.at("beta2");
    c.training.adam.eps = t.at("eps");
    // A merge patch deletes keys set to null, so absent means "no schedule".
    auto optional_number = [&t](const char* key) -> std::optional<double> {
      if (!t.contains(key) || t.at(key).is_null()) return std::nullopt;
      return t.at(key).get<double>();
    };
    c.training.adam.min_lr = optional_number("min_lr");
    c.training.adam.gamma = optional_number("gamma");
    c.training.loss = loss_from_name(t.at("loss").get<std::string>());
    c.training.batch_scenarios = t.at("batch_scenarios");
    c.training.batch_queries = t.at("batch_queries");

    const auto& n = j.at("noise");
    reject_unknown(n, "noise",
                   {"lambdas", "shots", "readout", "two_qubit_scale", "method", "query_stride", "max_scenarios"});
    c.noise.lambdas = n.at("lambdas").get<std::vector<double>>();
    c.noise.shots = n.at("shots").get<std::vector<std::int64_t>>();
    c.noise.readout_flip = n.at("readout");
    c.noise.two_qubit_scale = n.at("two_qubit_scale");
    c.noise.method = method_from_name(n.at("method").get<std::string>());
    c.noise.query_stride = n.at("query_stride");
    c.noise.max_scenarios = n.at("max_scenarios");

    const auto& cf = j.at("conformal");
    reject_unknown(cf, "conformal", {"alpha", "epsilon", "peak"});
    c.conformal.alpha = cf.at("alpha");
    c.conformal.epsilon = cf.at("epsilon");
    const std::string peak = cf.at("peak");
    if (peak != "full_width" && peak != "half_width") throw ConfigError("conformal.peak must be full_width or half_width");
    c.conformal.peak = peak == "full_width" ? PeakMode::kFullWidth : PeakMode::kHalfWidth;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(fmt::format("invalid config: {}", ex.what()));
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(file), nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", file.string(), e.what()));
  }
  return config_from_json(j);
}

std::string metrics_header() {
  return "experiment,mode,method,lambda,shots,rel_l2_percent,coverage_percent,avg_width,peak_uncertainty,"
         "retained_fraction,q_hat\n";
}

std::string metrics_line(const MetricsRow& r) {
  auto num = [](double v) { return std::isfinite(v) ? fmt::format("{:.10g}", v) : std::string(v > 0 ? "inf" : "nan"); };
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.experiment, r.mode, r.method, num(r.lambda), r.shots,
                     num(r.rel_l2_percent), num(r.coverage_percent), num(r.avg_width), num(r.peak_uncertainty),
                     num(r.retained_fraction), num(r.q_hat));
}

namespace {

void append_text(const std::filesystem::path& file, const std::string& header, const std::string& body) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  const bool fresh = !std::filesystem::exists(file) || std::filesystem::file_size(file) == 0;
  std::ofstream out(file, std::ios::app | std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot open {} for appending", file.string()));
  if (fresh) out << header;
  out << body;
  out.flush();
  if (!out) throw std::runtime_error(fmt::format("write to {} failed", file.string()));
}

}  // namespace

void append_metrics(const std::filesystem::path& file, const std::vector<MetricsRow>& rows) {
  std::string body;
  for (const auto& r : rows) body += metrics_line(r);
  append_text(file, metrics_header(), body);
}

void append_timing(const std::filesystem::path& file, const std::string& label, double seconds) {
  append_text(file, "label,seconds\n", fmt::format("{},{:.3f}\n", label, seconds));
}

std::vector<int> capped(std::vector<int> ids, int cap) {
  if (cap > 0 && static_cast<int>(ids.size()) > cap) ids.resize(static_cast<std::size_t>(cap));
  return ids;
}

InferenceSpec noisy_spec(const NoiseGrid& grid, double lambda, std::optional<std::int64_t> shots, std::uint64_t seed,
                         int threads) {
  InferenceSpec s;
  s.noise = NoiseProfile::depolarizing(lambda, grid.readout_flip, shots, grid.two_qubit_scale);
  s.method = grid.method;
  s.seed = derive_seed(seed, {std::bit_cast<std::uint64_t>(lambda), static_cast<std::uint64_t>(shots.value_or(0))});
  s.threads = threads;
  return s;
}

MetricsRow score_outputs(const EnsembleOutputs& out, const OperatorDataset& ds, std::span<const int> ids, double q_hat,
                         PeakMode peak) {
  std::vector<double> targets;
  std::vector<PredictionInterval> iv;
  std::vector<std::vector<double>> truth;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& t = ds.targets[static_cast<std::size_t>(ids[i])];
    truth.push_back(t);
    for (std::size_t k = 0; k < t.size(); ++k) {
      targets.push_back(t[k]);
      iv.push_back(predict_interval(out.mu[i][k], out.sigma[i][k], q_hat));
    }
  }
  const auto m = interval_metrics(targets, iv, peak);
  MetricsRow r;
  r.rel_l2_percent = relative_l2_percent(out.mu, truth);
  r.coverage_percent = 100.0 * m.coverage;
  r.avg_width = m.avg_width;
  r.peak_uncertainty = m.peak_uncertainty;
  r.retained_fraction = out.retained_fraction;
  r.q_hat = q_hat;
  return r;
}

namespace {

ConformalCalibration calibrate_outputs(const EnsembleOutputs& out, const OperatorDataset& ds, std::span<const int> ids,
                                       const ConformalSettings& s) {
  std::vector<double> t, mu, sg;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& tg = ds.targets[static_cast<std::size_t>(ids[i])];
    for (std::size_t k = 0; k < tg.size(); ++k) {
      t.push_back(tg[k]);
      mu.push_back(out.mu[i][k]);
      sg.push_back(out.sigma[i][k]);
    }
  }
  return fit_calibration(t, mu, sg, s.alpha, s.epsilon);
}

std::string method_label(const InferenceSpec& spec) {
  if (spec.oracle) return "oracle";
  if (!spec.uses_circuits()) return "exact";
  if (!spec.noise.shots) return "exact_probabilities";
  return method_name(spec.method);
}

}  // namespace

CellResult evaluate_cell(const Ensemble& ens, const OperatorDataset& ds, std::span<const int> cal,
                         std::span<const int> test, const InferenceSpec& spec, const ConformalSettings& conformal,
                         const std::string& experiment) {
  CellResult res;
  InferenceSpec cal_spec = spec;
  cal_spec.seed = derive_seed(spec.seed, {1});
  const auto cal_out = evaluate_ensemble(ens, ds, cal, cal_spec);
  res.calibration = calibrate_outputs(cal_out, ds, cal, conformal);
  InferenceSpec test_spec = spec;
  test_spec.seed = derive_seed(spec.seed, {2});
  res.test_outputs = evaluate_ensemble(ens, ds, test, test_spec);
  res.row = score_outputs(res.test_outputs, ds, test, res.calibration.q_hat, conformal.peak);
  res.row.experiment = experiment;
  res.row.mode = mode_name(ens.mode);
  res.row.method = method_label(spec);
  res.row.lambda = spec.noise.lambda_1q;  // the single-qubit strength is the nominal lambda
  res.row.shots = spec.noise.shots.value_or(-1);
  res.row.retained_fraction = 0.5 * (cal_out.retained_fraction + res.test_outputs.retained_fraction);
  return res;
}

// ---- pipeline --------------------------------------------------------------

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

OperatorDataset need_dataset(const Paths& p) {
  if (!std::filesystem::exists(p.dataset_stem().string() + ".json"))
    throw MissingInputError(fmt::format("no dataset at {}.json; run gen-data first", p.dataset_stem().string()));
  return load_dataset(p.dataset_stem());
}

Ensemble need_ensemble(const Paths& p, EnsembleMode mode) {
  if (!std::filesystem::exists(p.ensemble()))
    throw MissingInputError(fmt::format("no ensemble checkpoint at {}; run train first", p.ensemble().string()));
  Ensemble e = load_ensemble(p.ensemble());
  e.mode = mode;
  return e;
}

InferenceSpec exact_spec(bool oracle, int threads) {
  InferenceSpec s;
  s.oracle = oracle;
  s.threads = threads;
  return s;
}

}  // namespace

void step_gen_data(const ExperimentConfig& cfg, const Paths& p) {
  std::filesystem::create_directories(p.root);
  const auto ds = build_operator_dataset(cfg.dataset, derive_seed(cfg.seed, {1}));
  save_dataset(ds, p.dataset_stem());
  write_file_atomic(p.root / "config.json", cfg.to_json().dump(2) + "\n");
}

void step_train(const ExperimentConfig& cfg, const Paths& p) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ds = need_dataset(p);
  EnsembleTrainOptions opt;
  opt.members = cfg.members;
  opt.base_seed = derive_seed(cfg.seed, {2});
  opt.threads = cfg.threads;
  std::vector<LossTrace> traces;
  Ensemble ens = train_ensemble(cfg.arch, ds, cfg.training, opt, &traces);
  ens.mode = cfg.mode;
  save_ensemble(ens, p.ensemble());
  std::filesystem::create_directories(p.traces());
  for (std::size_t m = 0; m < traces.size(); ++m)
    write_file_atomic(p.traces() / fmt::format("member_{}.csv", m), traces[m].to_csv());
  append_timing(p.timings(), "train", seconds_since(t0));
}

ConformalCalibration step_calibrate(const ExperimentConfig& cfg, const Paths& p, bool oracle) {
  const auto ds = need_dataset(p);
  const Ensemble ens = need_ensemble(p, cfg.mode);
  const auto cal = ds.scenarios_in(SplitKind::kCal);
  const auto out = evaluate_ensemble(ens, ds, cal, exact_spec(oracle, cfg.threads));
  auto c = calibrate_outputs(out, ds, cal, cfg.conformal);
  auto j = c.to_json();
  j["experiment"] = cfg.name;
  j["mode"] = mode_name(ens.mode);
  write_file_atomic(p.calibration(), j.dump(2) + "\n");
  return c;
}

std::vector<MetricsRow> step_evaluate(const ExperimentConfig& cfg, const Paths& p, bool oracle) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ds = need_dataset(p);
  const Ensemble ens = need_ensemble(p, cfg.mode);
  if (!std::filesystem::exists(p.calibration()))
    throw MissingInputError(fmt::format("no calibration at {}; run calibrate first", p.calibration().string()));
  nlohmann::json cj;
  try {
    cj = nlohmann::json::parse(read_file(p.calibration()));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(e.what());
  }
  const auto cal = ConformalCalibration::from_json(cj);
  const auto test = ds.scenarios_in(SplitKind::kTest);
  const auto out = evaluate_ensemble(ens, ds, test, exact_spec(oracle, cfg.threads));
  MetricsRow r = score_outputs(out, ds, test, cal.q_hat, cfg.conformal.peak);
  r.experiment = cfg.name;
  r.mode = mode_name(ens.mode);
  r.method = oracle ? "oracle" : "exact";
  append_metrics(p.metrics(), {r});
  append_timing(p.timings(), "evaluate", seconds_since(t0));
  return {r};
}

namespace {

std::vector<MetricsRow> sweep(const ExperimentConfig& cfg, const Paths& p, const std::vector<EnsembleMode>& modes,
                              const std::string& label) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto full = need_dataset(p);
  const auto ds = subsample_queries(full, cfg.noise.query_stride);
  const auto cal = capped(ds.scenarios_in(SplitKind::kCal), cfg.noise.max_scenarios);
  const auto test = capped(ds.scenarios_in(SplitKind::kTest), cfg.noise.max_scenarios);
  std::vector<MetricsRow> rows;
  for (EnsembleMode mode : modes) {
    const Ensemble ens = need_ensemble(p, mode);
    for (double lambda : cfg.noise.lambdas)
      for (auto shots : cfg.noise.shots) {
        const auto spec = noisy_spec(cfg.noise, lambda, shots > 0 ? std::optional(shots) : std::nullopt,
                                     derive_seed(cfg.seed, {3}), cfg.threads);
        auto cell = evaluate_cell(ens, ds, cal, test, spec, cfg.conformal, cfg.name);
        rows.push_back(cell.row);
      }
  }
  append_metrics(p.metrics(), rows);
  append_timing(p.timings(), label, seconds_since(t0));
  return rows;
}

}  // namespace

std::vector<MetricsRow> step_noise_sweep(const ExperimentConfig& cfg, const Paths& p) {
  return sweep(cfg, p, {cfg.mode}, "noise-sweep");
}

std::vector<MetricsRow> step_compare(const ExperimentConfig& cfg, const Paths& p) {
  auto rows = sweep(cfg, p,
                    {EnsembleMode::kIndependent, EnsembleMode::kClassicalBranch, EnsembleMode::kClassicalTrunk,
                     EnsembleMode::kSPQC},
                    "compare");
  // Resource report: one standard circuit and one superposed circuit per
  // layer of each sub-network, loaded with a fixed unit input.
  const Ensemble ens = need_ensemble(p, EnsembleMode::kSPQC);
  nlohmann::json layers = nlohmann::json::array();
  auto report = [&](const char* side, auto pick) {
    const auto& first = pick(ens.members.front());
    for (std::size_t l = 0; l < first.layers.size(); ++l) {
      const auto& layout = first.layers[l].layout;
      const std::vector<double> x(static_cast<std::size_t>(layout.in_dim), 1.0 / std::sqrt(layout.in_dim));
      std::vector<std::vector<double>> th, xs;
      for (const auto& m : ens.members) {
        th.push_back(pick(m).layers[l].angles);
        xs.push_back(x);
      }
      const auto single = circuit_resources(tomography_circuit(layout, th.front(), x), "standard");
      const auto sup = circuit_resources(spqc_build(layout, th, xs), "spqc");
      layers.push_back({{"network", side},
                        {"layer", l},
                        {"width", layout.width},
                        {"standard", single.to_json()},
                        {"spqc", sup.to_json()},
                        {"sequential_depth", single.basis.depth * ens.members.size()}});
    }
  };
  report("branch", [](const DeepONetModel& m) -> const QOrthoNN& { return m.branch; });
  report("trunk", [](const DeepONetModel& m) -> const QOrthoNN& { return m.trunk; });
  const auto full = need_dataset(p);
  const auto test = full.scenarios_in(SplitKind::kTest);
  const double M = test.empty() ? 0.0 : static_cast<double>(full.query_index[static_cast<std::size_t>(test[0])].size());
  const auto hc = hybrid_cost(static_cast<double>(test.size()), M, cfg.arch.trunk_width + 1);
  nlohmann::json res{{"experiment", cfg.name},
                     {"members", ens.size()},
                     {"address_qubits", address_bits_for(ens.size())},
                     {"layers", layers},
                     {"hybrid_cost",
                      {{"branch_term", hc.branch_term},
                       {"query_term", hc.query_term},
                       {"hybrid_total", hc.hybrid_total()},
                       {"classical_baseline", hc.classical_baseline}}}};
  write_file_atomic(p.resources(), res.dump(2) + "\n");
  return rows;
}

}  // namespace qdon
