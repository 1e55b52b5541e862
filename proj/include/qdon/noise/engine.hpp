#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qdon/linalg.hpp"
#include "qdon/rng.hpp"
#include "qdon/unary/circuit.hpp"
#include "qdon/unary/layers.hpp"
#include "qdon/unary/outcomes.hpp"

namespace qdon {

struct NoiseProfile {
  double lambda_1q = 0.0;     // depolarizing strength after X and H
  double lambda_2q = 0.0;     // after RBS, CNOT and multiplexed gates
  double readout_flip = 0.0;  // independent per-qubit flip probability
  std::optional<std::int64_t> shots;  // nullopt: exact outcome probabilities
  std::uint64_t seed = 0;

  /// Profile with lambda_2q = scale * lambda.
  static NoiseProfile depolarizing(double lambda, double readout_flip,
                                   std::optional<std::int64_t> shots, double two_qubit_scale = 0.8);

  bool gate_noiseless() const noexcept { return lambda_1q == 0.0 && lambda_2q == 0.0; }
  bool ideal() const noexcept { return gate_noiseless() && readout_flip == 0.0 && !shots; }
  void validate() const;
};

enum class SamplingMethod { kMultinomial, kTrajectory };

inline constexpr int kMaxDensityQubits = 12;
inline constexpr int kMaxStatevectorQubits = 24;

/// Real symmetric density matrix. All supported gates are real orthogonal and
/// the channels used here map real matrices to real matrices, so the
/// imaginary part is identically zero and is not stored.
struct DensityState {
  int num_qubits = 0;
  Matrix rho;

  static DensityState ground(int num_qubits);
  double trace() const { return rho.trace(); }
};

/// (1 - lambda) rho + lambda Tr_S(rho) (x) I / 2^|S| on the wires in `support`.
void depolarize_inplace(DensityState& state, double lambda, std::span<const int> support);
DensityState depolarize(DensityState state, double lambda, std::span<const int> support);

DensityState evolve_density(const RBSCircuit& circuit, const NoiseProfile& noise);

/// Diagonal of rho followed by the per-qubit readout confusion channel.
std::vector<double> measure_probs(const DensityState& state, double readout_flip);
std::vector<double> apply_readout(std::vector<double> probs, int num_qubits, double flip);

/// Noiseless full-register amplitudes (all gate kinds supported).
std::vector<double> simulate_statevector(const RBSCircuit& circuit);

/// Exact outcome table after gate noise and readout error, using the cheapest
/// exact simulator that applies. `force_full` disables the reduced unary
/// shortcut (used by the brute-force cross-check path).
OutcomeProbabilities outcome_distribution(const RBSCircuit& circuit, const NoiseProfile& noise,
                                          bool force_full = false);

/// Multinomial draw by sequential conditional binomials.
std::vector<std::int64_t> sample_categorical(std::span<const double> probs, std::int64_t shots, Rng& rng);

ShotCounts multinomial_sample(std::span<const double> probs, std::int64_t shots, std::uint64_t seed,
                              int data_qubits, int address_bits = 0);
ShotCounts sample_outcomes(const OutcomeProbabilities& table, std::int64_t shots, Rng& rng);

/// Shot-by-shot stochastic simulation of the same channel evolve_density
/// applies, followed by per-qubit readout flips.
ShotCounts trajectory_sample(const RBSCircuit& circuit, const NoiseProfile& noise, std::int64_t shots,
                             std::uint64_t seed);

struct PostSelection {
  ShotCounts kept;
  double retained_fraction = 0.0;
  bool empty() const { return kept.retained_total() == 0; }
};

PostSelection postselect_unary(const ShotCounts& counts);

struct LayerEstimate {
  std::vector<double> y;
  double retained_fraction = 1.0;
};

/// Builds the layer's tomography circuit on unit-norm `x`, runs it under
/// `noise` and returns the post-selected estimate of W x.
LayerEstimate noisy_layer_forward(const PyramidLayout& layout, std::span<const double> angles,
                                  std::span<const double> x, const NoiseProfile& noise,
                                  std::uint64_t seed,
                                  SamplingMethod method = SamplingMethod::kMultinomial);

}  // namespace qdon
