#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qdon/unary/state.hpp"

namespace qdon {

/// Measurement results bucketed by (address, ancilla, unary index). Outcomes
/// whose data register is not a unary basis state go into the per-(address,
/// ancilla) invalid bucket.
template <class T>
struct OutcomeTable {
  int data_qubits = 0;
  int address_slots = 1;
  std::vector<T> unary;    // ((address * 2 + ancilla) * q + k)
  std::vector<T> invalid;  // (address * 2 + ancilla)

  OutcomeTable() = default;
  OutcomeTable(int q, int slots)
      : data_qubits(q),
        address_slots(slots),
        unary(static_cast<std::size_t>(slots) * 2 * q, T{}),
        invalid(static_cast<std::size_t>(slots) * 2, T{}) {}

  T& at(int address, int ancilla, int k) {
    return unary[(static_cast<std::size_t>(address) * 2 + ancilla) * data_qubits + k];
  }
  T at(int address, int ancilla, int k) const {
    return unary[(static_cast<std::size_t>(address) * 2 + ancilla) * data_qubits + k];
  }
  T& invalid_at(int address, int ancilla) { return invalid[address * 2 + ancilla]; }
  T invalid_at(int address, int ancilla) const { return invalid[address * 2 + ancilla]; }

  T retained(int address) const {
    T s{};
    for (int a = 0; a < 2; ++a)
      for (int k = 0; k < data_qubits; ++k) s += at(address, a, k);
    return s;
  }
  T retained_total() const {
    T s{};
    for (T v : unary) s += v;
    return s;
  }
  T total() const {
    T s = retained_total();
    for (T v : invalid) s += v;
    return s;
  }
};

using ShotCounts = OutcomeTable<std::int64_t>;
using OutcomeProbabilities = OutcomeTable<double>;

/// Buckets a full 2^N basis distribution (or count vector). N must equal
/// q + 1 + address_bits.
OutcomeProbabilities classify_distribution(std::span<const double> probs, int q, int address_bits);

OutcomeProbabilities probabilities_from_state(const UnaryState& state);

enum class EstimateNormalization {
  kRetained,  // divide by post-selected counts (default)
  kTotal,     // divide by all shots, no post-selection
};

/// y_j = sqrt(q) (T[0, e_{q-m+j}] - T[1, e_{q-m+j}]) / normaliser.
/// Throws EstimationError if the normaliser is zero.
std::vector<double> estimate_outputs(const ShotCounts& counts, int m, int address = 0,
                                     EstimateNormalization norm = EstimateNormalization::kRetained);
std::vector<double> estimate_outputs(const OutcomeProbabilities& probs, int m, int address = 0,
                                     EstimateNormalization norm = EstimateNormalization::kRetained);

/// CSV with header `address,ancilla,index,count`; index -1 marks the invalid bucket.
std::string to_csv(const ShotCounts& counts);

}  // namespace qdon
