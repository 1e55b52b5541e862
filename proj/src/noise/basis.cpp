#include "qdon/noise/basis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace qdon {

namespace {

class Emitter {
 public:
  explicit Emitter(int wires) : last_(static_cast<std::size_t>(wires), -1) {}

  void h(int w) {
    const long prev = last_[static_cast<std::size_t>(w)];
    if (prev >= 0 && ops_[static_cast<std::size_t>(prev)].kind == BasisKind::kH &&
        alive_[static_cast<std::size_t>(prev)]) {
      alive_[static_cast<std::size_t>(prev)] = 0;  // H H = I
      last_[static_cast<std::size_t>(w)] = before_[static_cast<std::size_t>(prev)];
      return;
    }
    push({BasisKind::kH, w, -1, 0.0});
  }
  void x(int w) { push({BasisKind::kX, w, -1, 0.0}); }
  void ry(int w, double a) { push({BasisKind::kRY, w, -1, a}); }
  void cz(int a, int b) { push({BasisKind::kCZ, a, b, 0.0}); }
  void cnot(int c, int t) {
    h(t);
    cz(c, t);
    h(t);
  }

  // Uniformly controlled RY on `target` as a Gray-code walk: one rotation per
  // control value, each followed by a CNOT from the control whose bit flips.
  // `rotate` relabels the controls cyclically so that cascades running side
  // by side hit different controls at each step.
  struct Cascade {
    int target;
    std::vector<double> phi;
    std::vector<int> ctrl_at_step;
  };

  static Cascade cascade(int target, const std::vector<int>& controls, const std::vector<double>& alpha,
                         std::size_t rotate) {
    const std::size_t k = controls.size();
    const std::size_t n = std::size_t{1} << k;
    Cascade c{target, std::vector<double>(n, 0.0), {}};
    if (k == 0) {
      c.phi[0] = alpha[0];
      return c;
    }
    std::vector<int> ctrl(k);
    std::vector<double> a(n);
    for (std::size_t i = 0; i < k; ++i) ctrl[i] = controls[(i + rotate) % k];
    for (std::size_t jr = 0; jr < n; ++jr) {
      std::size_t j = 0;
      for (std::size_t i = 0; i < k; ++i)
        if (jr >> i & 1U) j |= std::size_t{1} << ((i + rotate) % k);
      a[jr] = alpha[j];
    }
    auto gray = [](std::size_t i) { return i ^ (i >> 1); };
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        c.phi[i] += ((std::popcount(j & gray(i)) & 1) ? -1.0 : 1.0) * a[j] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      c.ctrl_at_step.push_back(ctrl[static_cast<std::size_t>(std::countr_zero(gray(i) ^ gray((i + 1) % n)))]);
    return c;
  }

  // Emits several cascades step by step. Their targets are distinct and they
  // meet only on controls through diagonal CZs, so interleaving is exact.
  void cascades(const std::vector<Cascade>& cs) {
    if (cs.empty()) return;
    const std::size_t steps = cs.front().phi.size();
    for (std::size_t i = 0; i < steps; ++i)
      for (const auto& c : cs) {
        ry(c.target, c.phi[i]);
        if (!c.ctrl_at_step.empty()) cnot(c.ctrl_at_step[i], c.target);
      }
  }

  void mux_ry(int target, const std::vector<int>& controls, const std::vector<double>& alpha, std::size_t rotate) {
    cascades({cascade(target, controls, alpha, rotate)});
  }

  std::vector<BasisOp> finish() const {
    std::vector<BasisOp> out;
    for (std::size_t i = 0; i < ops_.size(); ++i)
      if (alive_[i]) out.push_back(ops_[i]);
    return out;
  }

 private:
  void push(const BasisOp& op) {
    const std::size_t idx = ops_.size();
    ops_.push_back(op);
    alive_.push_back(1);
    before_.push_back(last_[static_cast<std::size_t>(op.w0)]);
    last_[static_cast<std::size_t>(op.w0)] = static_cast<long>(idx);
    if (op.w1 >= 0) last_[static_cast<std::size_t>(op.w1)] = static_cast<long>(idx);
  }

  std::vector<BasisOp> ops_;
  std::vector<char> alive_;
  std::vector<long> before_;  // previous op on w0 at push time (only used for H)
  std::vector<long> last_;
};

}  // namespace

namespace {

// Groups gates into layers in which multiplexed RBS gates may share the
// address register: they use it only as the control of diagonal gates, so
// they commute with each other whenever their data wires are disjoint.
std::vector<std::vector<std::size_t>> commuting_layers(const RBSCircuit& c) {
  const auto nq = static_cast<std::size_t>(c.total_qubits());
  std::vector<int> busy(nq, 0), diag(nq, 0);
  std::vector<std::vector<std::size_t>> layers;
  for (std::size_t i = 0; i < c.gates().size(); ++i) {
    const Gate& g = c.gates()[i];
    const auto wires = c.support(g);
    const bool mux = g.kind == GateKind::kMuxRBS;
    int t = 0;
    for (int w : wires) {
      const auto u = static_cast<std::size_t>(w);
      const bool addr = c.address_qubits() > 0 && w >= c.address_wire(0);
      t = std::max(t, busy[u]);
      if (!(mux && addr)) t = std::max(t, diag[u]);
    }
    for (int w : wires) {
      const auto u = static_cast<std::size_t>(w);
      const bool addr = c.address_qubits() > 0 && w >= c.address_wire(0);
      if (mux && addr)
        diag[u] = std::max(diag[u], t + 1);
      else
        busy[u] = t + 1;
    }
    if (static_cast<std::size_t>(t) >= layers.size()) layers.resize(static_cast<std::size_t>(t) + 1);
    layers[static_cast<std::size_t>(t)].push_back(i);
  }
  return layers;
}

}  // namespace

std::vector<BasisOp> decompose_to_basis(const RBSCircuit& c) {
  Emitter em(c.total_qubits());
  std::vector<int> address;
  for (int k = 0; k < c.address_qubits(); ++k) address.push_back(c.address_wire(k));
  for (const auto& layer : commuting_layers(c)) {
    std::vector<const Gate*> muxed;
    for (std::size_t gi : layer) {
      const Gate& g = c.gates()[gi];
      switch (g.kind) {
        case GateKind::kRBS:
          em.h(g.wire_a);
          em.h(g.wire_b);
          em.cz(g.wire_a, g.wire_b);
          em.ry(g.wire_a, -g.theta);
          em.ry(g.wire_b, g.theta);
          em.cz(g.wire_a, g.wire_b);
          em.h(g.wire_a);
          em.h(g.wire_b);
          break;
        case GateKind::kMuxRBS:
          muxed.push_back(&g);
          break;
        case GateKind::kX:
          em.x(g.wire_a);
          break;
        case GateKind::kH:
          em.h(g.wire_a);
          break;
        case GateKind::kCNOT:
          em.cnot(g.wire_a, g.wire_b);
          break;
        case GateKind::kPrepAddress:
          for (std::size_t k = 0; k < address.size(); ++k) {
            std::vector<int> ctrl(address.begin(), address.begin() + static_cast<std::ptrdiff_t>(k));
            em.mux_ry(address[k], ctrl, std::vector<double>(std::size_t{1} << k, 0.0), 0);
          }
          break;
      }
    }
    if (muxed.empty()) continue;
    // RBS frame around a pair of uniformly controlled rotations (-theta_j on
    // wire a, +theta_j on wire b). All cascades of the layer run interleaved.
    const std::size_t n = std::size_t{1} << address.size();
    std::vector<Emitter::Cascade> cs;
    for (std::size_t k = 0; k < muxed.size(); ++k) {
      const Gate& g = *muxed[k];
      std::vector<double> neg(n, 0.0), pos(n, 0.0);
      for (std::size_t j = 0; j < n && j < g.mux_thetas.size(); ++j) {
        neg[j] = -g.mux_thetas[j];
        pos[j] = g.mux_thetas[j];
      }
      em.h(g.wire_a);
      em.h(g.wire_b);
      em.cz(g.wire_a, g.wire_b);
      cs.push_back(Emitter::cascade(g.wire_a, address, neg, 2 * k));
      cs.push_back(Emitter::cascade(g.wire_b, address, pos, 2 * k + 1));
    }
    em.cascades(cs);
    for (const Gate* g : muxed) {
      em.cz(g->wire_a, g->wire_b);
      em.h(g->wire_a);
      em.h(g->wire_b);
    }
  }
  return em.finish();
}

BasisGateTally basis_gate_tally(const RBSCircuit& c) {
  const auto ops = decompose_to_basis(c);
  BasisGateTally t;
  std::vector<std::size_t> busy(static_cast<std::size_t>(c.total_qubits()), 0);
  for (const BasisOp& op : ops) {
    switch (op.kind) {
      case BasisKind::kCZ:
        ++t.two_qubit;
        break;
      case BasisKind::kRY:
      case BasisKind::kH:
        ++t.single_rotations;
        break;
      case BasisKind::kX:
        ++t.bit_flips;
        break;
    }
    auto& b0 = busy[static_cast<std::size_t>(op.w0)];
    if (op.w1 >= 0) {
      auto& b1 = busy[static_cast<std::size_t>(op.w1)];
      b0 = b1 = std::max(b0, b1) + 1;
    } else {
      ++b0;
    }
  }
  t.depth = busy.empty() ? 0 : *std::max_element(busy.begin(), busy.end());
  return t;
}

}  // namespace qdon
