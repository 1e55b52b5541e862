#include "compiled.hpp"

#include <cmath>

#include "qdon/errors.hpp"

namespace qdon::detail {

namespace {

Matrix address_prep_block(int members, int bits) {
  // Householder reflection sending |0> to the uniform superposition over the
  // first `members` address values.
  const int d = 1 << bits;
  Vector u = Vector::Zero(d);
  for (int i = 0; i < members; ++i) u(i) = 1.0 / std::sqrt(static_cast<double>(members));
  Vector v = -u;
  v(0) += 1.0;
  if (v.norm() < 1e-14) return Matrix::Identity(d, d);
  return Matrix::Identity(d, d) - 2.0 * v * v.transpose() / v.squaredNorm();
}

}  // namespace

std::vector<CompiledGate> compile(const RBSCircuit& circuit, double lambda_1q, double lambda_2q) {
  const int n = circuit.total_qubits();
  if (n > 30) throw CapacityError("register too large to index");
  const std::uint32_t dim = 1U << n;
  const int q = circuit.data_qubits();
  std::vector<CompiledGate> out;
  out.reserve(circuit.size());
  for (const Gate& g : circuit.gates()) {
    CompiledGate cg;
    cg.support = circuit.support(g);
    for (int w : cg.support) cg.support_mask |= 1U << w;
    cg.lambda = cg.support.size() == 1 ? lambda_1q : lambda_2q;
    const std::uint32_t ma = g.wire_a >= 0 ? 1U << g.wire_a : 0U;
    const std::uint32_t mb = g.wire_b >= 0 ? 1U << g.wire_b : 0U;
    switch (g.kind) {
      case GateKind::kRBS:
      case GateKind::kMuxRBS: {
        const bool mux = g.kind == GateKind::kMuxRBS;
        const double c0 = std::cos(g.theta), s0 = std::sin(g.theta);
        for (std::uint32_t i = 0; i < dim; ++i) {
          if (!(i & ma) || (i & mb)) continue;
          double c = c0, s = s0;
          if (mux) {
            const std::size_t addr = i >> (q + 1);
            const double t = addr < g.mux_thetas.size() ? g.mux_thetas[addr] : 0.0;
            if (t == 0.0) continue;
            c = std::cos(t);
            s = std::sin(t);
          }
          cg.pairs.push_back({i, i ^ ma ^ mb, c, s, -s, c});
        }
        break;
      }
      case GateKind::kX:
        for (std::uint32_t i = 0; i < dim; ++i)
          if (!(i & ma)) cg.pairs.push_back({i, i | ma, 0, 1, 1, 0});
        break;
      case GateKind::kCNOT:
        for (std::uint32_t i = 0; i < dim; ++i)
          if ((i & ma) && !(i & mb)) cg.pairs.push_back({i, i | mb, 0, 1, 1, 0});
        break;
      case GateKind::kH: {
        const double r = 1.0 / std::sqrt(2.0);
        for (std::uint32_t i = 0; i < dim; ++i)
          if (!(i & ma)) cg.pairs.push_back({i, i | ma, r, r, r, -r});
        break;
      }
      case GateKind::kPrepAddress:
        cg.block = address_prep_block(g.members, circuit.address_qubits());
        cg.block_wires = cg.support;
        break;
    }
    out.push_back(std::move(cg));
  }
  return out;
}

namespace {

// Index offsets of every assignment of the block wires, in local order.
std::vector<std::uint32_t> block_offsets(const std::vector<int>& wires) {
  std::vector<std::uint32_t> off(std::size_t{1} << wires.size(), 0);
  for (std::size_t l = 0; l < off.size(); ++l)
    for (std::size_t j = 0; j < wires.size(); ++j)
      if (l >> j & 1U) off[l] |= 1U << wires[j];
  return off;
}

}  // namespace

void apply_to_vector(const CompiledGate& g, double* psi, std::size_t dim) {
  for (const PairOp& p : g.pairs) {
    const double x = psi[p.i], y = psi[p.j];
    psi[p.i] = p.m00 * x + p.m01 * y;
    psi[p.j] = p.m10 * x + p.m11 * y;
  }
  if (g.block.size() == 0) return;
  const auto off = block_offsets(g.block_wires);
  std::uint32_t mask = 0;
  for (auto o : off) mask |= o;
  std::vector<double> loc(off.size()), res(off.size());
  for (std::uint32_t base = 0; base < dim; ++base) {
    if (base & mask) continue;
    for (std::size_t l = 0; l < off.size(); ++l) loc[l] = psi[base | off[l]];
    for (std::size_t r = 0; r < off.size(); ++r) {
      double acc = 0;
      for (std::size_t l = 0; l < off.size(); ++l)
        acc += g.block(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(l)) * loc[l];
      res[r] = acc;
    }
    for (std::size_t l = 0; l < off.size(); ++l) psi[base | off[l]] = res[l];
  }
}

void apply_to_density(const CompiledGate& g, Matrix& rho) {
  const auto dim = static_cast<std::size_t>(rho.rows());
  double* data = rho.data();
  // rho <- U rho: mix whole rows.
  for (const PairOp& p : g.pairs) {
    double* ri = data + p.i * dim;
    double* rj = data + p.j * dim;
    for (std::size_t c = 0; c < dim; ++c) {
      const double x = ri[c], y = rj[c];
      ri[c] = p.m00 * x + p.m01 * y;
      rj[c] = p.m10 * x + p.m11 * y;
    }
  }
  // rho <- rho U^T: mix columns inside every row.
  for (std::size_t r = 0; r < dim; ++r) {
    double* row = data + r * dim;
    for (const PairOp& p : g.pairs) {
      const double x = row[p.i], y = row[p.j];
      row[p.i] = p.m00 * x + p.m01 * y;
      row[p.j] = p.m10 * x + p.m11 * y;
    }
  }
  if (g.block.size() == 0) return;
  // Dense block: conjugate by the full operator built once (only used for
  // the single address-preparation gate, so the cost is acceptable).
  Matrix U = Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t col = 0; col < dim; ++col) {
    Vector e = U.col(static_cast<Eigen::Index>(col));
    CompiledGate only_block;
    only_block.block = g.block;
    only_block.block_wires = g.block_wires;
    apply_to_vector(only_block, e.data(), dim);
    U.col(static_cast<Eigen::Index>(col)) = e;
  }
  rho = U * rho * U.transpose();
}

}  // namespace qdon::detail
