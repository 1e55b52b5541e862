#include "qdon/unary/state.hpp"

#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "qdon/errors.hpp"

namespace qdon {

UnaryState::UnaryState(int data_qubits, bool has_ancilla)
    : q_(data_qubits),
      branches_(has_ancilla ? 2 : 1),
      amps_(static_cast<std::size_t>(branches_) * (data_qubits + 1), 0.0) {
  if (q_ < 1) throw ShapeError("unary state needs at least one data qubit");
  amps_[0] = 1.0;
}

UnaryState UnaryState::basis(int data_qubits, int wire, bool has_ancilla) {
  UnaryState s(data_qubits, has_ancilla);
  if (wire < 0 || wire >= data_qubits)
    throw IndexError(fmt::format("basis wire {} outside [0, {})", wire, data_qubits));
  s.amps_[0] = 0.0;
  s.unary(wire) = 1.0;
  return s;
}

UnaryState UnaryState::from_unary(std::span<const double> amplitudes, bool has_ancilla) {
  UnaryState s(static_cast<int>(amplitudes.size()), has_ancilla);
  s.amps_[0] = 0.0;
  for (std::size_t k = 0; k < amplitudes.size(); ++k) s.unary(static_cast<int>(k)) = amplitudes[k];
  return s;
}

std::size_t UnaryState::slot(int branch, int wire) const {
  if (branch < 0 || branch >= branches_) throw IndexError("ancilla branch out of range");
  if (wire < -1 || wire >= q_) throw IndexError(fmt::format("wire {} out of range", wire));
  return static_cast<std::size_t>(branch) * (q_ + 1) + static_cast<std::size_t>(wire + 1);
}

std::span<const double> UnaryState::unary_amplitudes(int branch) const {
  return std::span<const double>(amps_).subspan(slot(branch, 0), static_cast<std::size_t>(q_));
}

double UnaryState::norm() const {
  double s = 0.0;
  for (double a : amps_) s += a * a;
  return std::sqrt(s);
}

void apply_rbs_inplace(UnaryState& state, const RBSGate& g) {
  const int q = state.data_qubits();
  if (g.wire_a < 0 || g.wire_a >= q || g.wire_b < 0 || g.wire_b >= q || g.wire_a == g.wire_b)
    throw IndexError(fmt::format("RBS wires ({}, {}) invalid for q = {}", g.wire_a, g.wire_b, q));
  const double c = std::cos(g.theta), s = std::sin(g.theta);
  for (int br = 0; br < state.branches(); ++br) {
    double& a = state.unary(g.wire_a, br);
    double& b = state.unary(g.wire_b, br);
    const double beta = a, gamma = b;
    a = c * beta + s * gamma;
    b = -s * beta + c * gamma;
  }
}

UnaryState apply_rbs(UnaryState state, const RBSGate& gate) {
  apply_rbs_inplace(state, gate);
  return state;
}

namespace {

constexpr double kZero = 1e-14;

// Swaps ground <-> e_w inside one branch; legal only if no other unary
// amplitude is populated there (otherwise a weight-2 state would appear).
void flip_data_wire(UnaryState& s, int wire, int branch) {
  for (int k = 0; k < s.data_qubits(); ++k)
    if (k != wire && std::abs(s.unary(k, branch)) > kZero)
      throw UnsupportedGateError("bit flip on a data wire would leave the unary subspace");
  std::swap(s.ground(branch), s.unary(wire, branch));
}

void swap_branches(UnaryState& s) {
  s.ground(0) = std::exchange(s.ground(1), s.ground(0));
  for (int k = 0; k < s.data_qubits(); ++k) s.unary(k, 0) = std::exchange(s.unary(k, 1), s.unary(k, 0));
}

}  // namespace

UnaryState simulate_unary(const RBSCircuit& circuit, UnaryState state) {
  const int q = circuit.data_qubits();
  if (state.data_qubits() != q || (state.branches() == 2) != circuit.has_ancilla())
    throw ShapeError("state register does not match circuit register");
  const int anc = circuit.has_ancilla() ? q : -1;
  for (const Gate& g : circuit.gates()) {
    switch (g.kind) {
      case GateKind::kRBS:
        apply_rbs_inplace(state, RBSGate{g.wire_a, g.wire_b, g.theta});
        break;
      case GateKind::kX:
        if (g.wire_a == anc) {
          swap_branches(state);
        } else {
          for (int br = 0; br < state.branches(); ++br) flip_data_wire(state, g.wire_a, br);
        }
        break;
      case GateKind::kH: {
        if (g.wire_a != anc) throw UnsupportedGateError("Hadamard on a data wire");
        const double r = 1.0 / std::sqrt(2.0);
        auto mix = [r](double& a0, double& a1) {
          const double x = a0, y = a1;
          a0 = r * (x + y);
          a1 = r * (x - y);
        };
        mix(state.ground(0), state.ground(1));
        for (int k = 0; k < q; ++k) mix(state.unary(k, 0), state.unary(k, 1));
        break;
      }
      case GateKind::kCNOT:
        if (g.wire_a == anc) {
          flip_data_wire(state, g.wire_b, 1);
        } else {
          // Data-controlled: identity unless the control wire is populated.
          for (int br = 0; br < state.branches(); ++br)
            if (std::abs(state.unary(g.wire_a, br)) > kZero)
              throw UnsupportedGateError("data-controlled CNOT on a populated control");
        }
        break;
      case GateKind::kMuxRBS:
      case GateKind::kPrepAddress:
        throw UnsupportedGateError("address-register gates need the full simulator");
    }
  }
  return state;
}

}  // namespace qdon
