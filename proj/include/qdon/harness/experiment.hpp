#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdon/conformal/conformal.hpp"
#include "qdon/data/datagen.hpp"
#include "qdon/ensemble/ensemble.hpp"
#include "qdon/opnet/deeponet.hpp"

namespace qdon {

struct NoiseGrid {
  std::vector<double> lambdas{2e-4, 4e-4, 6e-4, 8e-4};
  std::vector<std::int64_t> shots{1000, 10000, 100000};
  double readout_flip = 0.01;
  double two_qubit_scale = 0.8;
  SamplingMethod method = SamplingMethod::kMultinomial;
  int query_stride = 1;   // evaluate every k-th query under noise
  int max_scenarios = 0;  // cap on cal/test functions under noise (0: all)
};

struct ConformalSettings {
  double alpha = 0.1;
  double epsilon = kDefaultSigmaEpsilon;
  PeakMode peak = PeakMode::kFullWidth;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  DatasetParams dataset;
  DeepONetArch arch;
  TrainConfig training;
  int members = 8;
  EnsembleMode mode = EnsembleMode::kIndependent;
  int threads = 1;
  NoiseGrid noise;
  ConformalSettings conformal;
  std::filesystem::path output_dir = "qdon_out";

  void validate() const;
  nlohmann::json to_json() const;
};

/// Named presets mirroring the published architecture and training rows:
/// antiderivative, advection, offline_v2v, offline_v2p, online_v2v, plus
/// antiderivative_w5 (the width-5 model used for the hardware-noise studies).
std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

/// Reads a config object. A "preset" key selects the base; every other key
/// overrides it (nested objects are merged).
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& file);

// Metrics.

struct MetricsRow {
  std::string experiment;
  std::string mode;
  std::string method;  // exact | multinomial | trajectory | oracle
  double lambda = 0.0;
  std::int64_t shots = -1;  // -1: exact probabilities
  double rel_l2_percent = 0.0;
  double coverage_percent = 0.0;
  double avg_width = 0.0;
  double peak_uncertainty = 0.0;
  double retained_fraction = 1.0;
  double q_hat = 0.0;
};

std::string metrics_header();
std::string metrics_line(const MetricsRow& r);

/// Appends rows, writing the header first when the file is new. Rows carry
/// no wall-clock data so repeated runs produce identical files.
void append_metrics(const std::filesystem::path& file, const std::vector<MetricsRow>& rows);
void append_timing(const std::filesystem::path& file, const std::string& label, double seconds);

// Evaluation of one noise cell: calibrate on `cal`, test on `test`, both
// under the same inference settings.

struct CellResult {
  MetricsRow row;
  ConformalCalibration calibration;
  EnsembleOutputs test_outputs;
};

CellResult evaluate_cell(const Ensemble& ens, const OperatorDataset& ds, std::span<const int> cal,
                         std::span<const int> test, const InferenceSpec& spec, const ConformalSettings& conformal,
                         const std::string& experiment);

/// Interval metrics for precomputed outputs against a fixed calibration.
MetricsRow score_outputs(const EnsembleOutputs& out, const OperatorDataset& ds, std::span<const int> ids,
                         double q_hat, PeakMode peak);

InferenceSpec noisy_spec(const NoiseGrid& grid, double lambda, std::optional<std::int64_t> shots,
                         std::uint64_t seed, int threads);

/// First `cap` ids (all when cap <= 0).
std::vector<int> capped(std::vector<int> ids, int cap);

// Pipeline steps on an output directory.

struct Paths {
  std::filesystem::path root;
  std::filesystem::path dataset_stem() const { return root / "dataset"; }
  std::filesystem::path ensemble() const { return root / "ensemble.json"; }
  std::filesystem::path calibration() const { return root / "calibration.json"; }
  std::filesystem::path metrics() const { return root / "metrics.csv"; }
  std::filesystem::path timings() const { return root / "timings.csv"; }
  std::filesystem::path traces() const { return root / "traces"; }
  std::filesystem::path resources() const { return root / "resources.json"; }
};

void step_gen_data(const ExperimentConfig& cfg, const Paths& p);
void step_train(const ExperimentConfig& cfg, const Paths& p);
ConformalCalibration step_calibrate(const ExperimentConfig& cfg, const Paths& p, bool oracle);
std::vector<MetricsRow> step_evaluate(const ExperimentConfig& cfg, const Paths& p, bool oracle);
std::vector<MetricsRow> step_noise_sweep(const ExperimentConfig& cfg, const Paths& p);
std::vector<MetricsRow> step_compare(const ExperimentConfig& cfg, const Paths& p);

}  // namespace qdon
