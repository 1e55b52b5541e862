#include "qdon/unary/circuit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "qdon/errors.hpp"

namespace qdon {

RBSCircuit::RBSCircuit(int data_qubits, bool has_ancilla, int address_qubits)
    : q_(data_qubits), ancilla_(has_ancilla), address_(address_qubits) {
  if (q_ < 1) throw ShapeError("circuit needs at least one data qubit");
  if (address_ < 0) throw ShapeError("negative address register size");
  if (address_ > 0 && !ancilla_) throw ShapeError("address register requires the ancilla");
}

int RBSCircuit::ancilla_wire() const {
  if (!ancilla_) throw IndexError("circuit has no ancilla");
  return q_;
}

int RBSCircuit::address_wire(int k) const {
  if (k < 0 || k >= address_) throw IndexError(fmt::format("address wire {} out of range", k));
  return q_ + 1 + k;
}

void RBSCircuit::check_wire(int w, const char* what) const {
  if (w < 0 || w >= total_qubits())
    throw IndexError(fmt::format("{}: wire {} outside [0, {})", what, w, total_qubits()));
}

void RBSCircuit::check_data_pair(int a, int b) const {
  if (a < 0 || a >= q_ || b < 0 || b >= q_)
    throw IndexError(fmt::format("RBS wires ({}, {}) outside data register [0, {})", a, b, q_));
  if (std::abs(a - b) != 1)
    throw IndexError(fmt::format("RBS wires ({}, {}) are not adjacent", a, b));
}

void RBSCircuit::add_rbs(int wire_a, int wire_b, double theta) {
  check_data_pair(wire_a, wire_b);
  gates_.push_back(Gate{GateKind::kRBS, wire_a, wire_b, theta, {}, 0});
}

void RBSCircuit::add_x(int wire) {
  check_wire(wire, "X");
  gates_.push_back(Gate{GateKind::kX, wire, -1, 0.0, {}, 0});
}

void RBSCircuit::add_h(int wire) {
  check_wire(wire, "H");
  gates_.push_back(Gate{GateKind::kH, wire, -1, 0.0, {}, 0});
}

void RBSCircuit::add_cnot(int control, int target) {
  check_wire(control, "CNOT control");
  check_wire(target, "CNOT target");
  if (control == target) throw IndexError("CNOT control equals target");
  gates_.push_back(Gate{GateKind::kCNOT, control, target, 0.0, {}, 0});
}

void RBSCircuit::add_mux_rbs(int wire_a, int wire_b, std::vector<double> thetas) {
  check_data_pair(wire_a, wire_b);
  if (thetas.empty() || thetas.size() > (std::size_t{1} << address_))
    throw ShapeError(fmt::format("multiplexed RBS needs 1..{} angles, got {}",
                                 std::size_t{1} << address_, thetas.size()));
  gates_.push_back(Gate{GateKind::kMuxRBS, wire_a, wire_b, 0.0, std::move(thetas), 0});
}

void RBSCircuit::add_prep_address(int members) {
  if (address_ == 0) throw ShapeError("address preparation without address register");
  if (members < 1 || members > (1 << address_))
    throw ShapeError(fmt::format("cannot spread over {} members with {} address qubits", members,
                                 address_));
  gates_.push_back(Gate{GateKind::kPrepAddress, -1, -1, 0.0, {}, members});
}

void RBSCircuit::append(const RBSCircuit& other) {
  if (other.q_ != q_ || other.ancilla_ != ancilla_ || other.address_ != address_)
    throw ShapeError("appending circuits over different registers");
  gates_.insert(gates_.end(), other.gates_.begin(), other.gates_.end());
}

std::size_t RBSCircuit::rbs_count() const {
  return static_cast<std::size_t>(std::count_if(gates_.begin(), gates_.end(), [](const Gate& g) {
    return g.kind == GateKind::kRBS || g.kind == GateKind::kMuxRBS;
  }));
}

std::vector<int> RBSCircuit::support(const Gate& g) const {
  switch (g.kind) {
    case GateKind::kRBS:
    case GateKind::kCNOT:
      return {g.wire_a, g.wire_b};
    case GateKind::kX:
    case GateKind::kH:
      return {g.wire_a};
    case GateKind::kMuxRBS: {
      std::vector<int> w{g.wire_a, g.wire_b};
      for (int k = 0; k < address_; ++k) w.push_back(q_ + 1 + k);
      return w;
    }
    case GateKind::kPrepAddress: {
      std::vector<int> w;
      for (int k = 0; k < address_; ++k) w.push_back(q_ + 1 + k);
      return w;
    }
  }
  return {};
}

RBSCircuit RBSCircuit::adjoint() const {
  RBSCircuit out(q_, ancilla_, address_);
  out.gates_.reserve(gates_.size());
  for (auto it = gates_.rbegin(); it != gates_.rend(); ++it) {
    Gate g = *it;
    switch (g.kind) {
      case GateKind::kRBS:
        g.theta = -g.theta;
        break;
      case GateKind::kMuxRBS:
        for (double& t : g.mux_thetas) t = -t;
        break;
      case GateKind::kPrepAddress:
        throw UnsupportedGateError("address preparation has no stored adjoint");
      default:
        break;  // X, H and CNOT are self-inverse
    }
    out.gates_.push_back(std::move(g));
  }
  return out;
}

std::vector<std::vector<std::size_t>> RBSCircuit::layer_schedule() const {
  std::vector<int> busy_until(static_cast<std::size_t>(total_qubits()), 0);
  std::vector<std::vector<std::size_t>> slices;
  for (std::size_t i = 0; i < gates_.size(); ++i) {
    const auto wires = support(gates_[i]);
    int t = 0;
    for (int w : wires) t = std::max(t, busy_until[static_cast<std::size_t>(w)]);
    for (int w : wires) busy_until[static_cast<std::size_t>(w)] = t + 1;
    if (static_cast<std::size_t>(t) >= slices.size()) slices.resize(static_cast<std::size_t>(t) + 1);
    slices[static_cast<std::size_t>(t)].push_back(i);
  }
  return slices;
}

std::size_t circuit_depth(const RBSCircuit& circuit) { return circuit.layer_schedule().size(); }

// ---- text form -------------------------------------------------------------

std::string to_text(const RBSCircuit& c) {
  std::string out = fmt::format("qubits {} ancilla {}", c.data_qubits(), c.has_ancilla() ? 1 : 0);
  if (c.address_qubits() > 0) out += fmt::format(" address {}", c.address_qubits());
  out += '\n';
  for (const Gate& g : c.gates()) {
    switch (g.kind) {
      case GateKind::kRBS:
        out += fmt::format("RBS {} {} {:.17g}\n", g.wire_a, g.wire_b, g.theta);
        break;
      case GateKind::kX:
        out += fmt::format("X {}\n", g.wire_a);
        break;
      case GateKind::kH:
        out += fmt::format("H {}\n", g.wire_a);
        break;
      case GateKind::kCNOT:
        out += fmt::format("CNOT {} {}\n", g.wire_a, g.wire_b);
        break;
      case GateKind::kMuxRBS:
        out += fmt::format("MUXRBS {} {}", g.wire_a, g.wire_b);
        for (double t : g.mux_thetas) out += fmt::format(" {:.17g}", t);
        out += '\n';
        break;
      case GateKind::kPrepAddress:
        out += fmt::format("PREP {}\n", g.members);
        break;
    }
  }
  return out;
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> tok;
  for (std::string t; is >> t;) tok.push_back(t);
  return tok;
}

int to_int(const std::string& s, std::size_t line_no) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw FormatError(fmt::format("line {}: expected integer, got '{}'", line_no, s));
  return v;
}

double to_double(const std::string& s, std::size_t line_no) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw FormatError(fmt::format("line {}: expected number, got '{}'", line_no, s));
  return v;
}

}  // namespace

RBSCircuit parse_circuit(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  RBSCircuit circuit;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (!have_header) {
      if (!(tok.size() == 4 || tok.size() == 6) || tok[0] != "qubits" || tok[2] != "ancilla" ||
          (tok.size() == 6 && tok[4] != "address"))
        throw FormatError("circuit text must start with 'qubits <q> ancilla <0|1> [address <a>]'");
      int address = tok.size() == 6 ? to_int(tok[5], line_no) : 0;
      circuit = RBSCircuit(to_int(tok[1], line_no), to_int(tok[3], line_no) != 0, address);
      have_header = true;
      continue;
    }
    const std::string& op = tok[0];
    auto need = [&](std::size_t n) {
      if (tok.size() != n)
        throw FormatError(fmt::format("line {}: '{}' expects {} fields", line_no, op, n - 1));
    };
    if (op == "RBS") {
      need(4);
      circuit.add_rbs(to_int(tok[1], line_no), to_int(tok[2], line_no), to_double(tok[3], line_no));
    } else if (op == "X") {
      need(2);
      circuit.add_x(to_int(tok[1], line_no));
    } else if (op == "H") {
      need(2);
      circuit.add_h(to_int(tok[1], line_no));
    } else if (op == "CNOT") {
      need(3);
      circuit.add_cnot(to_int(tok[1], line_no), to_int(tok[2], line_no));
    } else if (op == "MUXRBS") {
      if (tok.size() < 4) throw FormatError(fmt::format("line {}: MUXRBS needs angles", line_no));
      std::vector<double> th;
      for (std::size_t i = 3; i < tok.size(); ++i) th.push_back(to_double(tok[i], line_no));
      circuit.add_mux_rbs(to_int(tok[1], line_no), to_int(tok[2], line_no), std::move(th));
    } else if (op == "PREP") {
      need(2);
      circuit.add_prep_address(to_int(tok[1], line_no));
    } else {
      throw FormatError(fmt::format("line {}: unknown gate '{}'", line_no, op));
    }
  }
  if (!have_header) throw FormatError("empty circuit text");
  return circuit;
}

}  // namespace qdon
