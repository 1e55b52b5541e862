#pragma once

// Internal: gates lowered to disjoint 2x2 transforms on basis-index pairs,
// shared by the statevector, density and trajectory simulators.

#include <cstdint>
#include <vector>

#include "qdon/linalg.hpp"
#include "qdon/unary/circuit.hpp"

namespace qdon::detail {

struct PairOp {
  std::uint32_t i, j;
  double m00, m01, m10, m11;
};

struct CompiledGate {
  std::vector<PairOp> pairs;
  // Dense block on the address register (address preparation only).
  Matrix block;
  std::vector<int> block_wires;
  std::vector<int> support;
  std::uint32_t support_mask = 0;
  double lambda = 0.0;
};

std::vector<CompiledGate> compile(const RBSCircuit& circuit, double lambda_1q, double lambda_2q);

void apply_to_vector(const CompiledGate& g, double* psi, std::size_t dim);
void apply_to_density(const CompiledGate& g, Matrix& rho);

}  // namespace qdon::detail
