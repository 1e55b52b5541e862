#include "qdon/unary/layers.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "qdon/errors.hpp"

namespace qdon {

namespace {
constexpr double kNormTol = 1e-9;
}

std::vector<double> loader_angles(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) throw ShapeError("cannot load an empty vector");
  double sq = 0.0;
  for (double v : x) sq += v * v;
  if (!std::isfinite(sq) || std::abs(std::sqrt(sq) - 1.0) > kNormTol)
    throw NormalizationError(fmt::format("loader input has norm {:.12g}, expected 1", std::sqrt(sq)));
  if (n == 1) {
    if (x[0] < 0) throw NormalizationError("a single negative amplitude cannot be loaded");
    return {};
  }
  // tail[i] = || x[i..n-1] ||, accumulated from the back for accuracy.
  std::vector<double> tail(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) tail[i] = std::hypot(tail[i + 1], x[i]);
  std::vector<double> th(n - 1);
  for (std::size_t i = 0; i + 2 < n; ++i) th[i] = std::atan2(tail[i + 1], x[i]);
  th[n - 2] = std::atan2(x[n - 1], x[n - 2]);
  return th;
}

// Gate i moves amplitude from wire first+i onto first+i+1; the carried
// amplitude sits on the gate's second wire, hence RBS(first+i+1, first+i).
void append_loader(RBSCircuit& circuit, std::span<const double> angles, int first_wire) {
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const int w = first_wire + static_cast<int>(i);
    circuit.add_rbs(w + 1, w, angles[i]);
  }
}

void append_loader_adjoint(RBSCircuit& circuit, std::span<const double> angles, int first_wire) {
  for (std::size_t i = angles.size(); i-- > 0;) {
    const int w = first_wire + static_cast<int>(i);
    circuit.add_rbs(w + 1, w, -angles[i]);
  }
}

RBSCircuit loader_circuit(std::span<const double> x, int data_qubits, int first_wire) {
  if (first_wire < 0 || first_wire + static_cast<int>(x.size()) > data_qubits)
    throw IndexError("loader does not fit in the register");
  RBSCircuit c(data_qubits, false);
  append_loader(c, loader_angles(x), first_wire);
  return c;
}

PyramidLayout pyramid_layout(int out_dim, int in_dim) {
  if (out_dim < 1 || in_dim < 1)
    throw ShapeError(fmt::format("layer dimensions must be positive, got {}x{}", out_dim, in_dim));
  PyramidLayout L;
  L.out_dim = out_dim;
  L.in_dim = in_dim;
  L.width = std::max(out_dim, in_dim);
  const int q = L.width;
  if (q < 2) return L;  // 1x1: identity, no gates

  // Full pyramid: wire pair i fires at times i, i+2, ..., 2q-4-i.
  struct Raw {
    int wire, time;
  };
  std::vector<Raw> full;
  for (int t = 0; t <= 2 * q - 4; ++t)
    for (int i = 0; i <= q - 2; ++i)
      if (t >= i && t <= 2 * q - 4 - i && (t - i) % 2 == 0) full.push_back({i, t});

  // Forward cone of the inputs.
  std::vector<char> live(static_cast<std::size_t>(q), 0), fwd(full.size(), 0), bwd(full.size(), 0);
  for (int w = q - in_dim; w < q; ++w) live[static_cast<std::size_t>(w)] = 1;
  for (std::size_t g = 0; g < full.size(); ++g) {
    auto a = static_cast<std::size_t>(full[g].wire);
    if (live[a] || live[a + 1]) {
      fwd[g] = 1;
      live[a] = live[a + 1] = 1;
    }
  }
  // Backward cone of the outputs.
  std::fill(live.begin(), live.end(), 0);
  for (int w = q - out_dim; w < q; ++w) live[static_cast<std::size_t>(w)] = 1;
  for (std::size_t g = full.size(); g-- > 0;) {
    auto a = static_cast<std::size_t>(full[g].wire);
    if (live[a] || live[a + 1]) {
      bwd[g] = 1;
      live[a] = live[a + 1] = 1;
    }
  }
  // Re-slice the kept gates as early as their wires allow.
  std::vector<int> busy(static_cast<std::size_t>(q), 0);
  for (std::size_t g = 0; g < full.size(); ++g) {
    if (!(fwd[g] && bwd[g])) continue;
    auto a = static_cast<std::size_t>(full[g].wire);
    const int t = std::max(busy[a], busy[a + 1]);
    busy[a] = busy[a + 1] = t + 1;
    L.gates.push_back({full[g].wire, t});
    L.depth = std::max(L.depth, t + 1);
  }
  std::stable_sort(L.gates.begin(), L.gates.end(),
                   [](const PyramidGate& x, const PyramidGate& y) { return x.slice < y.slice; });
  return L;
}

namespace {
void check_angles(const PyramidLayout& L, std::span<const double> angles) {
  if (angles.size() != L.angle_count())
    throw ShapeError(fmt::format("layer {}x{} expects {} angles, got {}", L.out_dim, L.in_dim,
                                 L.angle_count(), angles.size()));
}
}  // namespace

void append_pyramid(RBSCircuit& circuit, const PyramidLayout& L, std::span<const double> angles) {
  check_angles(L, angles);
  if (circuit.data_qubits() < L.width) throw IndexError("pyramid wider than the register");
  for (std::size_t g = 0; g < L.gates.size(); ++g)
    circuit.add_rbs(L.gates[g].wire, L.gates[g].wire + 1, angles[g]);
}

void apply_pyramid(const PyramidLayout& L, std::span<const double> angles, std::span<double> v) {
  check_angles(L, angles);
  if (v.size() != static_cast<std::size_t>(L.width)) throw ShapeError("vector width mismatch");
  for (std::size_t g = 0; g < L.gates.size(); ++g) {
    const auto a = static_cast<std::size_t>(L.gates[g].wire);
    const double c = std::cos(angles[g]), s = std::sin(angles[g]);
    const double beta = v[a], gamma = v[a + 1];
    v[a] = c * beta + s * gamma;
    v[a + 1] = -s * beta + c * gamma;
  }
}

Matrix circuit_to_matrix(const PyramidLayout& L, std::span<const double> angles) {
  check_angles(L, angles);
  Matrix E = Matrix::Zero(L.width, L.in_dim);
  for (int i = 0; i < L.in_dim; ++i) E(L.input_offset() + i, i) = 1.0;
  for (std::size_t g = 0; g < L.gates.size(); ++g) {
    const int a = L.gates[g].wire;
    const double c = std::cos(angles[g]), s = std::sin(angles[g]);
    for (int col = 0; col < L.in_dim; ++col) {
      const double beta = E(a, col), gamma = E(a + 1, col);
      E(a, col) = c * beta + s * gamma;
      E(a + 1, col) = -s * beta + c * gamma;
    }
  }
  return E.bottomRows(L.out_dim);
}

std::vector<double> uniform_loader_angles(int q) {
  std::vector<double> r(static_cast<std::size_t>(q), 1.0 / std::sqrt(static_cast<double>(q)));
  return loader_angles(r);
}

RBSCircuit tomography_circuit(const PyramidLayout& L, std::span<const double> angles,
                              std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(L.in_dim))
    throw ShapeError(fmt::format("layer input has {} entries, expected {}", x.size(), L.in_dim));
  const int q = L.width;
  const auto x_angles = loader_angles(x);
  const auto r_angles = uniform_loader_angles(q);
  RBSCircuit c(q, true);
  const int anc = c.ancilla_wire();
  c.add_h(anc);
  c.add_cnot(anc, L.input_offset());
  append_loader(c, x_angles, L.input_offset());
  append_pyramid(c, L, angles);
  append_loader_adjoint(c, r_angles, 0);
  c.add_x(anc);
  c.add_cnot(anc, 0);
  append_loader(c, r_angles, 0);
  c.add_h(anc);
  return c;
}

}  // namespace qdon
