#pragma once

#include <span>
#include <vector>

#include "qdon/unary/circuit.hpp"

namespace qdon {

struct RBSGate {
  int wire_a;
  int wire_b;
  double theta;
};

/// Reduced simulator state: the ground amplitude plus q unary amplitudes,
/// stored once per ancilla branch. Valid as long as the circuit never leaves
/// the span of {ground, e_0..e_{q-1}} in each branch.
class UnaryState {
 public:
  UnaryState(int data_qubits, bool has_ancilla);

  static UnaryState basis(int data_qubits, int wire, bool has_ancilla = false);
  static UnaryState from_unary(std::span<const double> amplitudes, bool has_ancilla = false);

  int data_qubits() const noexcept { return q_; }
  int branches() const noexcept { return branches_; }

  double ground(int branch = 0) const { return amps_[slot(branch, -1)]; }
  double& ground(int branch = 0) { return amps_[slot(branch, -1)]; }
  double unary(int wire, int branch = 0) const { return amps_[slot(branch, wire)]; }
  double& unary(int wire, int branch = 0) { return amps_[slot(branch, wire)]; }
  std::span<const double> unary_amplitudes(int branch = 0) const;

  double norm() const;

 private:
  std::size_t slot(int branch, int wire) const;

  int q_;
  int branches_;
  std::vector<double> amps_;  // per branch: [ground, e_0, ..., e_{q-1}]
};

void apply_rbs_inplace(UnaryState& state, const RBSGate& gate);
UnaryState apply_rbs(UnaryState state, const RBSGate& gate);

/// Runs every gate of `circuit` on the reduced representation. Throws
/// UnsupportedGateError if a gate would create weight-2 or mixed content.
UnaryState simulate_unary(const RBSCircuit& circuit, UnaryState input);

}  // namespace qdon
