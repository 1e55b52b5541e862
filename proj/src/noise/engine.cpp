#include "qdon/noise/engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "compiled.hpp"
#include "qdon/errors.hpp"
#include "qdon/unary/state.hpp"

namespace qdon {

NoiseProfile NoiseProfile::depolarizing(double lambda, double readout_flip,
                                        std::optional<std::int64_t> shots, double two_qubit_scale) {
  NoiseProfile p;
  p.lambda_1q = lambda;
  p.lambda_2q = two_qubit_scale * lambda;
  p.readout_flip = readout_flip;
  p.shots = shots;
  p.validate();
  return p;
}

void NoiseProfile::validate() const {
  auto prob = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(fmt::format("{} = {} is not in [0, 1]", name, v));
  };
  prob(lambda_1q, "lambda_1q");
  prob(lambda_2q, "lambda_2q");
  prob(readout_flip, "readout_flip");
  if (shots && *shots < 1) throw ConfigError("shot count must be positive");
}

DensityState DensityState::ground(int num_qubits) {
  if (num_qubits > kMaxDensityQubits)
    throw CapacityError(fmt::format("density simulation of {} qubits exceeds the {}-qubit cap",
                                    num_qubits, kMaxDensityQubits));
  DensityState s;
  s.num_qubits = num_qubits;
  const Eigen::Index d = Eigen::Index{1} << num_qubits;
  s.rho = Matrix::Zero(d, d);
  s.rho(0, 0) = 1.0;
  return s;
}

void depolarize_inplace(DensityState& state, double lambda, std::span<const int> support) {
  if (lambda == 0.0 || support.empty()) return;
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("depolarizing strength outside [0, 1]");
  std::uint32_t mask = 0;
  for (int w : support) {
    if (w < 0 || w >= state.num_qubits) throw IndexError("depolarizing support outside register");
    mask |= 1U << w;
  }
  const auto dim = static_cast<std::uint32_t>(state.rho.rows());
  std::vector<std::uint32_t> sub;  // all assignments of the support bits
  for (std::uint32_t s = mask;; s = (s - 1) & mask) {
    sub.push_back(s);
    if (s == 0) break;
  }
  const double inv = 1.0 / static_cast<double>(sub.size());
  double* rho = state.rho.data();
  // For each (row, col) base pair outside the support, the reduced block's
  // trace over S is shared out evenly on the block diagonal.
  for (std::uint32_t r0 = 0; r0 < dim; ++r0) {
    if (r0 & mask) continue;
    for (std::uint32_t c0 = 0; c0 < dim; ++c0) {
      if (c0 & mask) continue;
      double tr = 0.0;
      for (std::uint32_t s : sub) tr += rho[std::size_t{r0 | s} * dim + (c0 | s)];
      const double add = lambda * tr * inv;
      for (std::uint32_t s : sub)
        for (std::uint32_t t : sub) {
          double& v = rho[std::size_t{r0 | s} * dim + (c0 | t)];
          v = (1.0 - lambda) * v + (s == t ? add : 0.0);
        }
    }
  }
}

DensityState depolarize(DensityState state, double lambda, std::span<const int> support) {
  depolarize_inplace(state, lambda, support);
  return state;
}

DensityState evolve_density(const RBSCircuit& circuit, const NoiseProfile& noise) {
  noise.validate();
  DensityState st = DensityState::ground(circuit.total_qubits());
  for (const auto& g : detail::compile(circuit, noise.lambda_1q, noise.lambda_2q)) {
    detail::apply_to_density(g, st.rho);
    depolarize_inplace(st, g.lambda, g.support);
  }
  return st;
}

std::vector<double> apply_readout(std::vector<double> p, int num_qubits, double flip) {
  if (flip == 0.0) return p;
  for (int w = 0; w < num_qubits; ++w) {
    const std::size_t m = std::size_t{1} << w;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (i & m) continue;
      const double a = p[i], b = p[i | m];
      p[i] = (1.0 - flip) * a + flip * b;
      p[i | m] = flip * a + (1.0 - flip) * b;
    }
  }
  return p;
}

std::vector<double> measure_probs(const DensityState& s, double readout_flip) {
  std::vector<double> p(static_cast<std::size_t>(s.rho.rows()));
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = std::max(0.0, s.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
  return apply_readout(std::move(p), s.num_qubits, readout_flip);
}

std::vector<double> simulate_statevector(const RBSCircuit& circuit) {
  const int n = circuit.total_qubits();
  if (n > kMaxStatevectorQubits)
    throw CapacityError(fmt::format("statevector of {} qubits exceeds the cap", n));
  const std::size_t dim = std::size_t{1} << n;
  std::vector<double> psi(dim, 0.0);
  psi[0] = 1.0;
  for (const auto& g : detail::compile(circuit, 0.0, 0.0)) detail::apply_to_vector(g, psi.data(), dim);
  return psi;
}

namespace {

bool reduced_representable(const RBSCircuit& c) {
  if (!c.has_ancilla() || c.address_qubits() > 0) return false;
  return std::none_of(c.gates().begin(), c.gates().end(), [](const Gate& g) {
    return g.kind == GateKind::kMuxRBS || g.kind == GateKind::kPrepAddress;
  });
}

}  // namespace

OutcomeProbabilities outcome_distribution(const RBSCircuit& circuit, const NoiseProfile& noise,
                                          bool force_full) {
  noise.validate();
  const int q = circuit.data_qubits();
  const int n = circuit.total_qubits();
  if (!circuit.has_ancilla()) throw ShapeError("outcome tables need an ancilla wire");
  std::vector<double> probs;
  if (noise.gate_noiseless()) {
    if (!force_full && reduced_representable(circuit)) {
      const UnaryState s = simulate_unary(circuit, UnaryState(q, true));
      if (noise.readout_flip == 0.0) return probabilities_from_state(s);
      probs.assign(std::size_t{1} << n, 0.0);
      for (int br = 0; br < 2; ++br) {
        const std::size_t base = static_cast<std::size_t>(br) << q;
        probs[base] = s.ground(br) * s.ground(br);
        for (int k = 0; k < q; ++k) probs[base | (std::size_t{1} << k)] = s.unary(k, br) * s.unary(k, br);
      }
    } else {
      probs = simulate_statevector(circuit);
      for (double& a : probs) a *= a;
    }
    probs = apply_readout(std::move(probs), n, noise.readout_flip);
  } else {
    probs = measure_probs(evolve_density(circuit, noise), noise.readout_flip);
  }
  return classify_distribution(probs, q, circuit.address_qubits());
}

std::vector<std::int64_t> sample_categorical(std::span<const double> probs, std::int64_t shots, Rng& rng) {
  if (shots < 0) throw ConfigError("negative shot count");
  double total = 0.0;
  for (double p : probs) {
    if (p < -1e-12 || !std::isfinite(p)) throw NormalizationError("negative or non-finite probability");
    total += std::max(0.0, p);
  }
  if (!(total > 0.0)) throw NormalizationError("probabilities sum to zero");
  std::vector<std::int64_t> counts(probs.size(), 0);
  std::int64_t remaining = shots;
  double mass = total;
  for (std::size_t k = 0; k < probs.size() && remaining > 0; ++k) {
    const double p = std::max(0.0, probs[k]);
    if (k + 1 == probs.size() || p >= mass) {
      counts[k] = remaining;
      remaining = 0;
      break;
    }
    if (p == 0.0) {
      mass -= p;
      continue;
    }
    std::binomial_distribution<std::int64_t> bin(remaining, std::clamp(p / mass, 0.0, 1.0));
    counts[k] = bin(rng);
    remaining -= counts[k];
    mass -= p;
  }
  return counts;
}

ShotCounts sample_outcomes(const OutcomeProbabilities& t, std::int64_t shots, Rng& rng) {
  std::vector<double> flat(t.unary);
  flat.insert(flat.end(), t.invalid.begin(), t.invalid.end());
  const auto counts = sample_categorical(flat, shots, rng);
  ShotCounts out(t.data_qubits, t.address_slots);
  std::copy_n(counts.begin(), out.unary.size(), out.unary.begin());
  std::copy(counts.begin() + static_cast<std::ptrdiff_t>(out.unary.size()), counts.end(), out.invalid.begin());
  return out;
}

ShotCounts multinomial_sample(std::span<const double> probs, std::int64_t shots, std::uint64_t seed,
                              int data_qubits, int address_bits) {
  double total = 0.0;
  for (double p : probs) {
    if (p < -1e-12 || !std::isfinite(p)) throw NormalizationError("negative or non-finite probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw NormalizationError(fmt::format("probabilities sum to {:.12g}", total));
  Rng rng(seed);
  return sample_outcomes(classify_distribution(probs, data_qubits, address_bits), shots, rng);
}

ShotCounts trajectory_sample(const RBSCircuit& circuit, const NoiseProfile& noise, std::int64_t shots,
                             std::uint64_t seed) {
  noise.validate();
  const int n = circuit.total_qubits();
  if (n > 20) throw CapacityError("trajectory simulation limited to 20 qubits");
  if (!circuit.has_ancilla()) throw ShapeError("outcome tables need an ancilla wire");
  const std::size_t dim = std::size_t{1} << n;
  const auto gates = detail::compile(circuit, noise.lambda_1q, noise.lambda_2q);
  const std::size_t G = gates.size();

  // prefix[g] is the noiseless state before gate g; prefix[G] is the output.
  std::vector<std::vector<double>> prefix(G + 1, std::vector<double>(dim, 0.0));
  prefix[0][0] = 1.0;
  for (std::size_t g = 0; g < G; ++g) {
    prefix[g + 1] = prefix[g];
    detail::apply_to_vector(gates[g], prefix[g + 1].data(), dim);
  }

  // Cumulative distribution of the first gate that suffers an error event;
  // entry G means an error-free shot.
  std::vector<double> first_err(G + 1);
  double survive = 1.0, acc = 0.0;
  for (std::size_t g = 0; g < G; ++g) {
    acc += survive * gates[g].lambda;
    first_err[g] = acc;
    survive *= 1.0 - gates[g].lambda;
  }
  first_err[G] = 1.0;

  auto cumulative = [](const std::vector<double>& psi) {
    std::vector<double> c(psi.size());
    double s = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) c[i] = (s += psi[i] * psi[i]);
    return c;
  };
  const std::vector<double> clean_cdf = cumulative(prefix[G]);

  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw_index = [&](const std::vector<double>& cdf) {
    const double u = unif(rng) * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
  };

  // Depolarizing event on S: project S onto a computational basis pattern
  // with Born weights, then reset S to a uniformly random pattern. Averaged
  // over outcomes this is exactly Tr_S(rho) (x) I / 2^|S|.
  std::vector<double> psi(dim), scratch(dim);
  auto error_event = [&](const detail::CompiledGate& g) {
    const std::uint32_t mask = g.support_mask;
    std::vector<std::uint32_t> pats;
    for (std::uint32_t s = mask;; s = (s - 1) & mask) {
      pats.push_back(s);
      if (s == 0) break;
    }
    std::vector<double> w(pats.size(), 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
      const std::uint32_t pat = static_cast<std::uint32_t>(i) & mask;
      for (std::size_t k = 0; k < pats.size(); ++k)
        if (pats[k] == pat) {
          w[k] += psi[i] * psi[i];
          break;
        }
    }
    std::vector<double> wc(w.size());
    std::partial_sum(w.begin(), w.end(), wc.begin());
    const std::uint32_t from = pats[draw_index(wc)];
    const std::uint32_t to = pats[static_cast<std::size_t>(unif(rng) * static_cast<double>(pats.size())) % pats.size()];
    double norm = 0.0;
    std::fill(scratch.begin(), scratch.end(), 0.0);
    for (std::size_t i = 0; i < dim; ++i)
      if ((static_cast<std::uint32_t>(i) & mask) == from) {
        scratch[(i & ~std::size_t{mask}) | to] = psi[i];
        norm += psi[i] * psi[i];
      }
    const double inv = 1.0 / std::sqrt(norm);
    for (std::size_t i = 0; i < dim; ++i) psi[i] = scratch[i] * inv;
  };

  ShotCounts counts(circuit.data_qubits(), 1 << circuit.address_qubits());
  const int q = circuit.data_qubits();
  const std::size_t data_mask = (std::size_t{1} << q) - 1;
  std::vector<double> cdf(dim);
  for (std::int64_t shot = 0; shot < shots; ++shot) {
    const double u = unif(rng);
    const auto g0 = static_cast<std::size_t>(std::upper_bound(first_err.begin(), first_err.end(), u) - first_err.begin());
    std::size_t outcome = 0;
    if (g0 >= G) {
      outcome = draw_index(clean_cdf);
    } else {
      psi = prefix[g0 + 1];
      error_event(gates[g0]);
      for (std::size_t g = g0 + 1; g < G; ++g) {
        detail::apply_to_vector(gates[g], psi.data(), dim);
        if (gates[g].lambda > 0.0 && unif(rng) < gates[g].lambda) error_event(gates[g]);
      }
      double s = 0.0;
      for (std::size_t i = 0; i < dim; ++i) cdf[i] = (s += psi[i] * psi[i]);
      outcome = draw_index(cdf);
    }
    if (noise.readout_flip > 0.0)
      for (int w = 0; w < n; ++w)
        if (unif(rng) < noise.readout_flip) outcome ^= std::size_t{1} << w;
    const std::size_t data = outcome & data_mask;
    const int anc = static_cast<int>(outcome >> q & 1U);
    const int addr = static_cast<int>(outcome >> (q + 1));
    if (std::popcount(data) == 1)
      ++counts.at(addr, anc, std::countr_zero(data));
    else
      ++counts.invalid_at(addr, anc);
  }
  return counts;
}

PostSelection postselect_unary(const ShotCounts& counts) {
  PostSelection out;
  out.kept = counts;
  std::fill(out.kept.invalid.begin(), out.kept.invalid.end(), 0);
  const auto total = counts.total();
  out.retained_fraction =
      total > 0 ? static_cast<double>(counts.retained_total()) / static_cast<double>(total) : 0.0;
  return out;
}

LayerEstimate noisy_layer_forward(const PyramidLayout& layout, std::span<const double> angles,
                                  std::span<const double> x, const NoiseProfile& noise,
                                  std::uint64_t seed, SamplingMethod method) {
  const RBSCircuit circuit = tomography_circuit(layout, angles, x);
  LayerEstimate est;
  if (!noise.shots) {
    const auto dist = outcome_distribution(circuit, noise);
    est.retained_fraction = dist.retained_total() / dist.total();
    est.y = estimate_outputs(dist, layout.out_dim);
    return est;
  }
  ShotCounts counts;
  if (method == SamplingMethod::kTrajectory) {
    counts = trajectory_sample(circuit, noise, *noise.shots, seed);
  } else {
    Rng rng(seed);
    counts = sample_outcomes(outcome_distribution(circuit, noise), *noise.shots, rng);
  }
  const PostSelection ps = postselect_unary(counts);
  if (ps.empty()) throw EstimationError("every shot was discarded by post-selection");
  est.retained_fraction = ps.retained_fraction;
  est.y = estimate_outputs(ps.kept, layout.out_dim);
  return est;
}

}  // namespace qdon
