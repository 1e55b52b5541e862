#pragma once

#include <cstddef>
#include <vector>

#include "qdon/unary/circuit.hpp"

namespace qdon {

enum class BasisKind { kCZ, kRY, kH, kX };

struct BasisOp {
  BasisKind kind;
  int w0;
  int w1 = -1;
  double angle = 0.0;  // RY(angle) = exp(-i angle Y / 2)
};

/// Counts after lowering to {CZ, RY, H, X}.
struct BasisGateTally {
  std::size_t two_qubit = 0;         // CZ
  std::size_t single_rotations = 0;  // RY and H
  std::size_t bit_flips = 0;         // X
  std::size_t depth = 0;
};

/// Lowers a circuit to the basis set. RBS uses two CZ and two opposite RY
/// rotations between Hadamard pairs, CNOT is H-CZ-H, and a multiplexed RBS
/// replaces each RY by a Gray-code uniformly controlled rotation. Adjacent
/// Hadamard pairs on the same wire are cancelled. Address preparation for a
/// member count that is not a power of two is lowered for counting only (its
/// rotation angles are left at zero).
std::vector<BasisOp> decompose_to_basis(const RBSCircuit& circuit);

BasisGateTally basis_gate_tally(const RBSCircuit& circuit);

}  // namespace qdon
