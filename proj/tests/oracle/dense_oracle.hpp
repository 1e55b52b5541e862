#pragma once

// Brute-force reference simulator used only by tests. Every gate is expanded
// to an explicit 2^N x 2^N complex matrix and noise is applied through the
// Pauli-twirl form of the depolarizing channel. Deliberately slow and shares
// no code with the library's simulators.

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "qdon/unary/circuit.hpp"

namespace oracle {

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

// Embeds a local operator acting on `wires` (local bit j <-> wires[j]).
inline CMat embed(const CMat& local, const std::vector<int>& wires, int nqubits) {
  const std::size_t dim = std::size_t{1} << nqubits;
  std::size_t mask = 0;
  for (int w : wires) mask |= std::size_t{1} << w;
  auto local_index = [&](std::size_t full) {
    std::size_t li = 0;
    for (std::size_t j = 0; j < wires.size(); ++j)
      if (full >> wires[j] & 1U) li |= std::size_t{1} << j;
    return li;
  };
  CMat M = CMat::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t out = 0; out < dim; ++out)
    for (std::size_t in = 0; in < dim; ++in)
      if ((out & ~mask) == (in & ~mask))
        M(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)) =
            local(static_cast<Eigen::Index>(local_index(out)), static_cast<Eigen::Index>(local_index(in)));
  return M;
}

// RBS in local basis index bit_a + 2 bit_b.
inline CMat rbs_local(double t) {
  CMat m = CMat::Zero(4, 4);
  m(0, 0) = m(3, 3) = 1;
  m(1, 1) = m(2, 2) = std::cos(t);
  m(1, 2) = std::sin(t);   // |e_a> gets + s * amplitude of |e_b>
  m(2, 1) = -std::sin(t);  // |e_b> gets - s * amplitude of |e_a>
  return m;
}

inline CMat x_local() {
  CMat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline CMat h_local() {
  CMat m(2, 2);
  const double r = 1 / std::sqrt(2.0);
  m << r, r, r, -r;
  return m;
}
inline CMat cnot_local() {  // control = local bit 0
  CMat m = CMat::Zero(4, 4);
  m(0, 0) = m(2, 2) = 1;
  m(3, 1) = m(1, 3) = 1;
  return m;
}

inline CMat address_prep_local(int members, int bits) {
  // Householder reflection sending |0> to the uniform state over `members`.
  const int d = 1 << bits;
  Eigen::VectorXcd u = Eigen::VectorXcd::Zero(d);
  for (int i = 0; i < members; ++i) u(i) = 1.0 / std::sqrt(double(members));
  Eigen::VectorXcd v = -u;
  v(0) += 1.0;
  if (v.norm() < 1e-14) return CMat::Identity(d, d);
  return CMat::Identity(d, d) - 2.0 * v * v.adjoint() / v.squaredNorm();
}

inline CMat gate_matrix(const qdon::Gate& g, const qdon::RBSCircuit& c) {
  const int n = c.total_qubits();
  using K = qdon::GateKind;
  switch (g.kind) {
    case K::kRBS:
      return embed(rbs_local(g.theta), {g.wire_a, g.wire_b}, n);
    case K::kX:
      return embed(x_local(), {g.wire_a}, n);
    case K::kH:
      return embed(h_local(), {g.wire_a}, n);
    case K::kCNOT:
      return embed(cnot_local(), {g.wire_a, g.wire_b}, n);
    case K::kMuxRBS: {
      // Block-diagonal over address values; unused addresses act trivially.
      std::vector<int> wires{g.wire_a, g.wire_b};
      const int a = c.address_qubits();
      for (int k = 0; k < a; ++k) wires.push_back(c.address_wire(k));
      const int d = 4 << a;
      CMat local = CMat::Zero(d, d);
      for (int addr = 0; addr < (1 << a); ++addr) {
        const double t = addr < static_cast<int>(g.mux_thetas.size()) ? g.mux_thetas[addr] : 0.0;
        local.block(addr * 4, addr * 4, 4, 4) = rbs_local(t);
      }
      return embed(local, wires, n);
    }
    case K::kPrepAddress: {
      std::vector<int> wires;
      for (int k = 0; k < c.address_qubits(); ++k) wires.push_back(c.address_wire(k));
      return embed(address_prep_local(g.members, c.address_qubits()), wires, n);
    }
  }
  return {};
}

inline CVec run_statevector(const qdon::RBSCircuit& c) {
  const Eigen::Index dim = Eigen::Index{1} << c.total_qubits();
  CVec psi = CVec::Zero(dim);
  psi(0) = 1;
  for (const auto& g : c.gates()) psi = gate_matrix(g, c) * psi;
  return psi;
}

inline std::vector<CMat> paulis() {
  CMat I = CMat::Identity(2, 2), X(2, 2), Y(2, 2), Z(2, 2);
  X << 0, 1, 1, 0;
  Y << 0, cd(0, -1), cd(0, 1), 0;
  Z << 1, 0, 0, -1;
  return {I, X, Y, Z};
}

// (1 - lambda) rho + lambda / 4^k sum_P P rho P^dagger over all k-qubit Paulis.
inline CMat depolarize(const CMat& rho, double lambda, const std::vector<int>& wires, int n) {
  if (lambda == 0.0) return rho;
  const auto P = paulis();
  const std::size_t k = wires.size();
  const std::size_t terms = std::size_t{1} << (2 * k);
  CMat acc = CMat::Zero(rho.rows(), rho.cols());
  for (std::size_t code = 0; code < terms; ++code) {
    CMat op = CMat::Identity(rho.rows(), rho.cols());
    for (std::size_t j = 0; j < k; ++j) op = embed(P[(code >> (2 * j)) & 3U], {wires[j]}, n) * op;
    acc += op * rho * op.adjoint();
  }
  return (1.0 - lambda) * rho + lambda / static_cast<double>(terms) * acc;
}

inline CMat run_density(const qdon::RBSCircuit& c, double lambda1, double lambda2) {
  const int n = c.total_qubits();
  const Eigen::Index dim = Eigen::Index{1} << n;
  CMat rho = CMat::Zero(dim, dim);
  rho(0, 0) = 1;
  for (const auto& g : c.gates()) {
    CMat U = gate_matrix(g, c);
    rho = U * rho * U.adjoint();
    auto wires = c.support(g);
    rho = depolarize(rho, wires.size() == 1 ? lambda1 : lambda2, wires, n);
  }
  return rho;
}

inline std::vector<double> readout(const std::vector<double>& p, int n, double flip) {
  std::vector<double> cur = p;
  for (int w = 0; w < n; ++w) {
    std::vector<double> nxt(cur.size());
    for (std::size_t i = 0; i < cur.size(); ++i) {
      nxt[i] += (1 - flip) * cur[i];
      nxt[i ^ (std::size_t{1} << w)] += flip * cur[i];
    }
    cur = nxt;
  }
  return cur;
}

// Reference m x n layer matrix: product of embedded 2x2 Givens blocks.
inline Eigen::MatrixXd givens_product(int q, const std::vector<std::pair<int, double>>& gates) {
  Eigen::MatrixXd U = Eigen::MatrixXd::Identity(q, q);
  for (auto [w, t] : gates) {
    Eigen::MatrixXd G = Eigen::MatrixXd::Identity(q, q);
    G(w, w) = std::cos(t);
    G(w, w + 1) = std::sin(t);
    G(w + 1, w) = -std::sin(t);
    G(w + 1, w + 1) = std::cos(t);
    U = G * U;
  }
  return U;
}

}  // namespace oracle
