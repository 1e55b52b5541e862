#include "qdon/unary/outcomes.hpp"

#include <bit>
#include <cmath>

#include <fmt/format.h>

#include "qdon/errors.hpp"

namespace qdon {

OutcomeProbabilities classify_distribution(std::span<const double> probs, int q, int address_bits) {
  const int n = q + 1 + address_bits;
  if (probs.size() != (std::size_t{1} << n))
    throw ShapeError(fmt::format("distribution has {} entries, expected 2^{}", probs.size(), n));
  OutcomeProbabilities out(q, 1 << address_bits);
  const std::size_t data_mask = (std::size_t{1} << q) - 1;
  for (std::size_t idx = 0; idx < probs.size(); ++idx) {
    const double p = probs[idx];
    if (p == 0.0) continue;
    const std::size_t data = idx & data_mask;
    const int anc = static_cast<int>((idx >> q) & 1U);
    const int addr = static_cast<int>(idx >> (q + 1));
    if (std::popcount(data) == 1)
      out.at(addr, anc, std::countr_zero(data)) += p;
    else
      out.invalid_at(addr, anc) += p;
  }
  return out;
}

OutcomeProbabilities probabilities_from_state(const UnaryState& s) {
  if (s.branches() != 2) throw ShapeError("outcome table needs the ancilla branch");
  OutcomeProbabilities out(s.data_qubits(), 1);
  for (int br = 0; br < 2; ++br) {
    out.invalid_at(0, br) = s.ground(br) * s.ground(br);
    for (int k = 0; k < s.data_qubits(); ++k) out.at(0, br, k) = s.unary(k, br) * s.unary(k, br);
  }
  return out;
}

namespace {

template <class T>
std::vector<double> estimate_impl(const OutcomeTable<T>& t, int m, int address,
                                  EstimateNormalization norm) {
  const int q = t.data_qubits;
  if (m < 1 || m > q) throw ShapeError(fmt::format("cannot read {} outputs from {} wires", m, q));
  if (address < 0 || address >= t.address_slots) throw IndexError("address out of range");
  double denom = 0.0;
  if (norm == EstimateNormalization::kRetained) {
    denom = static_cast<double>(t.retained(address));
  } else {
    denom = static_cast<double>(t.retained(address)) +
            static_cast<double>(t.invalid_at(address, 0)) + static_cast<double>(t.invalid_at(address, 1));
  }
  if (!(denom > 0.0)) throw EstimationError("no retained outcomes to estimate from");
  const double scale = std::sqrt(static_cast<double>(q)) / denom;
  std::vector<double> y(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    const int k = q - m + j;
    y[static_cast<std::size_t>(j)] =
        scale * (static_cast<double>(t.at(address, 0, k)) - static_cast<double>(t.at(address, 1, k)));
  }
  return y;
}

}  // namespace

std::vector<double> estimate_outputs(const ShotCounts& counts, int m, int address,
                                     EstimateNormalization norm) {
  return estimate_impl(counts, m, address, norm);
}

std::vector<double> estimate_outputs(const OutcomeProbabilities& probs, int m, int address,
                                     EstimateNormalization norm) {
  return estimate_impl(probs, m, address, norm);
}

std::string to_csv(const ShotCounts& c) {
  std::string out = "address,ancilla,index,count\n";
  for (int addr = 0; addr < c.address_slots; ++addr)
    for (int anc = 0; anc < 2; ++anc) {
      for (int k = 0; k < c.data_qubits; ++k)
        out += fmt::format("{},{},{},{}\n", addr, anc, k, c.at(addr, anc, k));
      out += fmt::format("{},{},-1,{}\n", addr, anc, c.invalid_at(addr, anc));
    }
  return out;
}

}  // namespace qdon
