#pragma once

#include <span>
#include <vector>

#include "qdon/linalg.hpp"
#include "qdon/unary/circuit.hpp"

namespace qdon {

// ---- data loader ---------------------------------------------------------

/// n-1 chain angles that amplitude-encode a unit vector. Throws
/// NormalizationError when | ||x|| - 1 | > 1e-9.
std::vector<double> loader_angles(std::span<const double> x);

/// Appends the diagonal chain S(x) on wires first..first+n-1.
void append_loader(RBSCircuit& circuit, std::span<const double> angles, int first_wire);
void append_loader_adjoint(RBSCircuit& circuit, std::span<const double> angles, int first_wire);

RBSCircuit loader_circuit(std::span<const double> x, int data_qubits, int first_wire = 0);

// ---- pyramid layer -------------------------------------------------------

struct PyramidGate {
  int wire;   // acts on (wire, wire + 1)
  int slice;  // time step in the light-cone-pruned schedule
};

/// Gate layout of an orthogonal layer mapping R^n to R^m on q = max(m, n)
/// wires. Inputs enter on the bottom n wires, outputs leave on the bottom m.
struct PyramidLayout {
  int out_dim = 0;
  int in_dim = 0;
  int width = 0;
  int depth = 0;
  std::vector<PyramidGate> gates;

  std::size_t angle_count() const noexcept { return gates.size(); }
  int input_offset() const noexcept { return width - in_dim; }
  int output_offset() const noexcept { return width - out_dim; }
};

PyramidLayout pyramid_layout(int out_dim, int in_dim);

void append_pyramid(RBSCircuit& circuit, const PyramidLayout& layout,
                    std::span<const double> angles);

/// Applies the layer's Givens sweep in place to a full-width vector.
void apply_pyramid(const PyramidLayout& layout, std::span<const double> angles,
                   std::span<double> wires);

/// m x n restriction of the layer's unitary to the input/output wires.
Matrix circuit_to_matrix(const PyramidLayout& layout, std::span<const double> angles);

// ---- tomography ----------------------------------------------------------

/// Angles for the uniform reference vector (1/sqrt(q), ..., 1/sqrt(q)).
std::vector<double> uniform_loader_angles(int q);

/// Full sign-resolving measurement circuit for one layer on input `x` (unit
/// norm, length in_dim). Uses q data wires plus the ancilla at wire q.
RBSCircuit tomography_circuit(const PyramidLayout& layout, std::span<const double> angles,
                              std::span<const double> x);

}  // namespace qdon
