#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace qdon {

enum class GateKind : std::uint8_t {
  kRBS,
  kX,
  kCNOT,
  kH,
  kMuxRBS,       // RBS whose angle is selected by the address register
  kPrepAddress,  // uniform superposition over the first `members` addresses
};

struct Gate {
  GateKind kind = GateKind::kRBS;
  int wire_a = -1;  // RBS: first wire, CNOT: control, X/H: target
  int wire_b = -1;  // RBS: second wire, CNOT: target
  double theta = 0.0;
  std::vector<double> mux_thetas;  // kMuxRBS only, indexed by address value
  int members = 0;                 // kPrepAddress only
};

/// Ordered gate list over a fixed register.
///
/// Wire layout: data wires 0..q-1, then the ancilla at wire q (when present),
/// then address wires q+1..q+a. Basis index bit k corresponds to wire k.
class RBSCircuit {
 public:
  RBSCircuit() = default;
  RBSCircuit(int data_qubits, bool has_ancilla, int address_qubits = 0);

  int data_qubits() const noexcept { return q_; }
  bool has_ancilla() const noexcept { return ancilla_; }
  int address_qubits() const noexcept { return address_; }
  int total_qubits() const noexcept { return q_ + (ancilla_ ? 1 : 0) + address_; }
  int ancilla_wire() const;
  int address_wire(int k) const;

  void add_rbs(int wire_a, int wire_b, double theta);
  void add_x(int wire);
  void add_h(int wire);
  void add_cnot(int control, int target);
  void add_mux_rbs(int wire_a, int wire_b, std::vector<double> thetas);
  void add_prep_address(int members);

  void append(const RBSCircuit& other);

  const std::vector<Gate>& gates() const noexcept { return gates_; }
  std::size_t size() const noexcept { return gates_.size(); }
  std::size_t rbs_count() const;

  /// Wires touched by gate `g`, address wires included for multiplexed gates.
  std::vector<int> support(const Gate& g) const;

  /// Reversed order with negated angles. Throws for address preparation,
  /// which has no stored inverse.
  RBSCircuit adjoint() const;

  /// Greedy as-soon-as-possible time slices; entries are gate indices.
  std::vector<std::vector<std::size_t>> layer_schedule() const;

 private:
  void check_wire(int w, const char* what) const;
  void check_data_pair(int a, int b) const;

  int q_ = 0;
  bool ancilla_ = false;
  int address_ = 0;
  std::vector<Gate> gates_;
};

std::size_t circuit_depth(const RBSCircuit& circuit);

// Line-oriented text form, e.g.
//   qubits 5 ancilla 1 address 2
//   RBS 0 1 0.785398
//   CNOT 5 0
std::string to_text(const RBSCircuit& circuit);
RBSCircuit parse_circuit(std::string_view text);

}  // namespace qdon
