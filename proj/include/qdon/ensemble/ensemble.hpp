#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdon/noise/basis.hpp"
#include "qdon/noise/engine.hpp"
#include "qdon/opnet/deeponet.hpp"

namespace qdon {

// Which parts of each member run on the (simulated) quantum device during
// noisy inference. Training is always classical and exact.
enum class EnsembleMode {
  kIndependent,      // every member, both sub-networks, on its own circuits
  kClassicalBranch,  // branch evaluated exactly, trunk on circuits
  kClassicalTrunk,   // trunk evaluated exactly, branch on circuits
  kSPQC,             // all members superposed in one circuit per layer
};

const char* mode_name(EnsembleMode m);
EnsembleMode mode_from_name(const std::string& s);

struct Ensemble {
  DeepONetArch arch;
  std::vector<DeepONetModel> members;
  std::vector<std::uint64_t> seeds;
  EnsembleMode mode = EnsembleMode::kIndependent;

  int size() const noexcept { return static_cast<int>(members.size()); }
};

struct EnsembleTrainOptions {
  int members = 8;
  std::uint64_t base_seed = 0;
  int threads = 1;
  int max_retries = 3;  // a diverged member restarts from a shifted seed
};

/// Trains every member on the full training split with its own seed; no
/// bootstrap resampling. `traces`, when given, receives one loss trace per
/// member.
Ensemble train_ensemble(const DeepONetArch& arch, const OperatorDataset& ds, const TrainConfig& cfg,
                        const EnsembleTrainOptions& opt, std::vector<LossTrace>* traces = nullptr);

struct EnsemblePrediction {
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation (divides by L)
};

EnsemblePrediction aggregate(std::span<const double> member_outputs);

/// Marks one sub-network as classically evaluated. `side` must be
/// kClassicalBranch or kClassicalTrunk.
Ensemble hybrid_configure(Ensemble ens, EnsembleMode side);

struct HybridCost {
  double branch_term = 0.0;         // N n^2: one classical branch pass per function
  double query_term = 0.0;          // N M n log2 n: quantum trunk passes
  double classical_baseline = 0.0;  // N M n^2
  double hybrid_total() const noexcept { return branch_term + query_term; }
};

HybridCost hybrid_cost(double n_functions, double n_queries, double width);

// Superposed execution of L layers that share one pyramid layout.

int address_bits_for(int members);

/// Tomography circuit in which the loader and the pyramid are multiplexed on
/// an address register prepared in uniform superposition over the members.
/// With one member this is exactly tomography_circuit().
RBSCircuit spqc_build(const PyramidLayout& layout, const std::vector<std::vector<double>>& member_angles,
                      const std::vector<std::vector<double>>& member_inputs);

/// Per-member estimates of W_j x_j from one run of an spqc_build circuit.
/// Exact probabilities when noise.shots is empty, otherwise a single global
/// shot budget split by address after post-selection of the data register.
std::vector<LayerEstimate> spqc_execute(const RBSCircuit& circuit, int members, int out_dim,
                                        const NoiseProfile& noise, std::uint64_t seed,
                                        SamplingMethod method = SamplingMethod::kMultinomial,
                                        bool force_full = false);

struct ResourceReport {
  std::string label;
  int qubits = 0;
  std::size_t logical_depth = 0;  // in native gates (RBS, multiplexed RBS, ...)
  std::size_t logical_gates = 0;
  BasisGateTally basis;

  nlohmann::json to_json() const;
};

ResourceReport circuit_resources(const RBSCircuit& circuit, std::string label);

// Inference over a dataset.

struct InferenceSpec {
  NoiseProfile noise;
  SamplingMethod method = SamplingMethod::kMultinomial;
  bool oracle = false;          // brute-force full-register simulation for every circuit
  bool force_circuits = false;  // run circuits even when the noise profile is ideal
  std::uint64_t seed = 0;
  int threads = 1;

  bool uses_circuits() const noexcept { return oracle || force_circuits || !noise.ideal(); }
};

struct EnsembleOutputs {
  std::vector<std::vector<std::vector<double>>> members;  // [member][scenario][query]
  std::vector<std::vector<double>> mu, sigma;             // [scenario][query]
  double retained_fraction = 1.0;                         // mean over executed circuits
  long circuits = 0;
};

/// Predictions of every member for each scenario's own query list. The
/// branch runs once per (member, function); the trunk runs once per
/// (member, function, query) so every prediction carries its own shot noise.
EnsembleOutputs evaluate_ensemble(const Ensemble& ens, const OperatorDataset& ds, std::span<const int> scenarios,
                                  const InferenceSpec& spec);

/// Copy of `ds` that keeps every `stride`-th query of each scenario.
OperatorDataset subsample_queries(const OperatorDataset& ds, int stride);

inline constexpr int kEnsembleFormatVersion = 1;

nlohmann::json ensemble_to_json(const Ensemble& ens);
Ensemble ensemble_from_json(const nlohmann::json& j);
void save_ensemble(const Ensemble& ens, const std::filesystem::path& file);
Ensemble load_ensemble(const std::filesystem::path& file);

}  // namespace qdon
