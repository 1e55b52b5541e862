#include "qdon/ensemble/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <tuple>

#include <fmt/format.h>

#include "qdon/errors.hpp"
#include "qdon/io.hpp"
#include "qdon/qonn/serialize.hpp"
#include "qdon/rng.hpp"
#include "qdon/unary/layers.hpp"

namespace qdon {

const char* mode_name(EnsembleMode m) {
  switch (m) {
    case EnsembleMode::kIndependent: return "independent";
    case EnsembleMode::kClassicalBranch: return "classical_branch";
    case EnsembleMode::kClassicalTrunk: return "classical_trunk";
    case EnsembleMode::kSPQC: return "spqc";
  }
  return "?";
}

EnsembleMode mode_from_name(const std::string& s) {
  for (auto m : {EnsembleMode::kIndependent, EnsembleMode::kClassicalBranch, EnsembleMode::kClassicalTrunk,
                 EnsembleMode::kSPQC})
    if (s == mode_name(m)) return m;
  throw ConfigError(fmt::format("unknown ensemble mode '{}'", s));
}

Ensemble train_ensemble(const DeepONetArch& arch, const OperatorDataset& ds, const TrainConfig& cfg,
                        const EnsembleTrainOptions& opt, std::vector<LossTrace>* traces) {
  if (opt.members < 1) throw ConfigError("an ensemble needs at least one member");
  if (opt.max_retries < 0) throw ConfigError("negative retry budget");
  const auto L = static_cast<std::size_t>(opt.members);
  Ensemble ens;
  ens.arch = arch;
  ens.members.resize(L);
  ens.seeds.resize(L);
  std::vector<LossTrace> local(L);
  std::vector<std::exception_ptr> errors(L);

  auto run_member = [&](std::size_t m) {
    try {
      for (int attempt = 0;; ++attempt) {
        const std::uint64_t seed = derive_seed(opt.base_seed, {m, static_cast<std::uint64_t>(attempt)});
        try {
          auto r = train(make_deeponet(arch, ds, seed), ds, cfg, seed);
          ens.members[m] = std::move(r.model);
          ens.seeds[m] = seed;
          local[m] = std::move(r.trace);
          return;
        } catch (const NumericalError&) {
          if (attempt >= opt.max_retries) throw;
        }
      }
    } catch (...) {
      errors[m] = std::current_exception();
    }
  };

  const int threads = std::clamp(opt.threads, 1, opt.members);
  if (threads == 1) {
    for (std::size_t m = 0; m < L; ++m) run_member(m);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t m; (m = next.fetch_add(1)) < L;) run_member(m);
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  if (traces) *traces = std::move(local);
  return ens;
}

EnsemblePrediction aggregate(std::span<const double> v) {
  if (v.empty()) throw ShapeError("aggregate needs at least one member output");
  const auto n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / n)};
}

Ensemble hybrid_configure(Ensemble ens, EnsembleMode side) {
  if (side != EnsembleMode::kClassicalBranch && side != EnsembleMode::kClassicalTrunk)
    throw ConfigError("hybrid configuration needs the branch or the trunk side");
  ens.mode = side;
  return ens;
}

HybridCost hybrid_cost(double n_functions, double n_queries, double width) {
  if (n_functions < 0 || n_queries < 0 || width < 1) throw ConfigError("cost model needs N, M >= 0 and n >= 1");
  HybridCost c;
  c.branch_term = n_functions * width * width;
  c.query_term = n_functions * n_queries * width * std::log2(width);
  c.classical_baseline = n_functions * n_queries * width * width;
  return c;
}

int address_bits_for(int members) {
  if (members < 1) throw ConfigError("member count must be positive");
  return static_cast<int>(std::bit_width(static_cast<unsigned>(members - 1)));
}

RBSCircuit spqc_build(const PyramidLayout& layout, const std::vector<std::vector<double>>& member_angles,
                      const std::vector<std::vector<double>>& member_inputs) {
  const std::size_t L = member_angles.size();
  if (L == 0 || member_inputs.size() != L) throw ShapeError("one angle set and one input per member are required");
  std::vector<RBSCircuit> parts;
  parts.reserve(L);
  for (std::size_t j = 0; j < L; ++j) {
    if (member_angles[j].size() != layout.angle_count())
      throw ShapeError(fmt::format("member {} has {} angles, layout needs {}", j, member_angles[j].size(),
                                   layout.angle_count()));
    parts.push_back(tomography_circuit(layout, member_angles[j], member_inputs[j]));
  }
  if (L == 1) return parts.front();
  const int a = address_bits_for(static_cast<int>(L));
  RBSCircuit c(layout.width, true, a);
  if (std::has_single_bit(L)) {
    for (int k = 0; k < a; ++k) c.add_h(c.address_wire(k));
  } else {
    c.add_prep_address(static_cast<int>(L));
  }
  const auto& ref = parts.front().gates();
  for (std::size_t g = 0; g < ref.size(); ++g) {
    const Gate& gate = ref[g];
    switch (gate.kind) {
      case GateKind::kRBS: {
        std::vector<double> th(L);
        for (std::size_t j = 0; j < L; ++j) th[j] = parts[j].gates()[g].theta;
        if (std::all_of(th.begin(), th.end(), [&](double t) { return t == th.front(); }))
          c.add_rbs(gate.wire_a, gate.wire_b, th.front());
        else
          c.add_mux_rbs(gate.wire_a, gate.wire_b, std::move(th));
        break;
      }
      case GateKind::kX: c.add_x(gate.wire_a); break;
      case GateKind::kH: c.add_h(gate.wire_a); break;
      case GateKind::kCNOT: c.add_cnot(gate.wire_a, gate.wire_b); break;
      default: throw UnsupportedGateError("unexpected gate in a tomography circuit");
    }
  }
  return c;
}

namespace {

// Estimates per address from either exact probabilities or sampled counts.
std::vector<LayerEstimate> run_superposed(const RBSCircuit& circuit, int members, int out_dim,
                                          const NoiseProfile& noise, std::uint64_t seed, SamplingMethod method,
                                          bool force_full, const OutcomeProbabilities* cached) {
  std::vector<LayerEstimate> out(static_cast<std::size_t>(members));
  if (noise.shots && method == SamplingMethod::kTrajectory) {
    const PostSelection ps = postselect_unary(trajectory_sample(circuit, noise, *noise.shots, seed));
    for (int a = 0; a < members; ++a) {
      if (ps.kept.retained(a) == 0) throw EstimationError(fmt::format("no shots retained for address {}", a));
      out[static_cast<std::size_t>(a)] = {estimate_outputs(ps.kept, out_dim, a), ps.retained_fraction};
    }
    return out;
  }
  OutcomeProbabilities local;
  if (!cached) {
    local = outcome_distribution(circuit, noise, force_full);
    cached = &local;
  }
  if (!noise.shots) {
    const double frac = cached->retained_total() / cached->total();
    for (int a = 0; a < members; ++a) out[static_cast<std::size_t>(a)] = {estimate_outputs(*cached, out_dim, a), frac};
    return out;
  }
  Rng rng(seed);
  const PostSelection ps = postselect_unary(sample_outcomes(*cached, *noise.shots, rng));
  for (int a = 0; a < members; ++a) {
    if (ps.kept.retained(a) == 0) throw EstimationError(fmt::format("no shots retained for address {}", a));
    out[static_cast<std::size_t>(a)] = {estimate_outputs(ps.kept, out_dim, a), ps.retained_fraction};
  }
  return out;
}

}  // namespace

std::vector<LayerEstimate> spqc_execute(const RBSCircuit& circuit, int members, int out_dim,
                                        const NoiseProfile& noise, std::uint64_t seed, SamplingMethod method,
                                        bool force_full) {
  noise.validate();
  if (members < 1 || members > (1 << circuit.address_qubits()))
    throw ShapeError(fmt::format("{} members do not fit {} address qubits", members, circuit.address_qubits()));
  return run_superposed(circuit, members, out_dim, noise, seed, method, force_full, nullptr);
}

nlohmann::json ResourceReport::to_json() const {
  return {{"label", label},
          {"qubits", qubits},
          {"logical_depth", logical_depth},
          {"logical_gates", logical_gates},
          {"two_qubit", basis.two_qubit},
          {"single_rotations", basis.single_rotations},
          {"bit_flips", basis.bit_flips},
          {"basis_depth", basis.depth}};
}

ResourceReport circuit_resources(const RBSCircuit& circuit, std::string label) {
  ResourceReport r;
  r.label = std::move(label);
  r.qubits = circuit.total_qubits();
  r.logical_depth = circuit_depth(circuit);
  r.logical_gates = circuit.size();
  r.basis = basis_gate_tally(circuit);
  return r;
}

OperatorDataset subsample_queries(const OperatorDataset& ds, int stride) {
  if (stride < 1) throw ConfigError("query stride must be positive");
  OperatorDataset out = ds;
  for (std::size_t i = 0; i < out.query_index.size(); ++i) {
    std::vector<int> idx;
    std::vector<double> tgt;
    for (std::size_t k = 0; k < ds.query_index[i].size(); k += static_cast<std::size_t>(stride)) {
      idx.push_back(ds.query_index[i][k]);
      tgt.push_back(ds.targets[i][k]);
    }
    out.query_index[i] = std::move(idx);
    out.targets[i] = std::move(tgt);
  }
  return out;
}

namespace {

// Layer-0 outcome distributions of the trunk depend only on the query point,
// so they are computed once and re-sampled for every function.
class DistributionCache {
 public:
  using Key = std::tuple<int, int>;  // member (-1: superposed), pool index

  std::shared_ptr<const OutcomeProbabilities> get(const Key& k, const std::function<OutcomeProbabilities()>& make) {
    {
      std::lock_guard lock(mu_);
      if (auto it = map_.find(k); it != map_.end()) return it->second;
    }
    auto value = std::make_shared<const OutcomeProbabilities>(make());
    std::lock_guard lock(mu_);
    return map_.emplace(k, std::move(value)).first->second;
  }

 private:
  std::mutex mu_;
  std::map<Key, std::shared_ptr<const OutcomeProbabilities>> map_;
};

struct RunStats {
  double retained = 0.0;
  long circuits = 0;
  void add(const LayerEstimate& e) {
    retained += e.retained_fraction;
    ++circuits;
  }
};

class Evaluator {
 public:
  Evaluator(const Ensemble& ens, const OperatorDataset& ds, const InferenceSpec& spec)
      : ens_(ens), ds_(ds), spec_(spec) {
    const bool cacheable = spec.noise.shots && spec.method == SamplingMethod::kMultinomial;
    cache_layer0_ = cacheable;
    for (const auto& m : ens.members) trunk_inputs_.push_back(m.trunk_features(ds.queries));
    if (ens.mode == EnsembleMode::kClassicalBranch) {
      for (const auto& m : ens.members) {
        Matrix u = ds.branch.transpose();
        branch_exact_.push_back(qonn_forward(m.branch, u));
      }
    }
    if (ens.mode == EnsembleMode::kClassicalTrunk)
      for (std::size_t m = 0; m < ens.members.size(); ++m)
        trunk_exact_.push_back(qonn_forward(ens.members[m].trunk, trunk_inputs_[m]));
  }

  // Fills preds[m][slot] for scenario `sid`.
  void scenario(int sid, std::vector<std::vector<std::vector<double>>>& preds, std::size_t slot, RunStats& st) {
    const auto L = ens_.members.size();
    const auto& qidx = ds_.query_index[static_cast<std::size_t>(sid)];
    const auto usid = static_cast<std::uint64_t>(sid);
    std::vector<double> u(ds_.branch.row(sid).data(), ds_.branch.row(sid).data() + ds_.d_u);

    std::vector<std::vector<double>> b(L);
    if (ens_.mode == EnsembleMode::kSPQC) {
      b = superposed(branches(), std::vector(L, u), derive_seed(spec_.seed, {3, usid}), -1, st);
    } else {
      for (std::size_t m = 0; m < L; ++m) {
        if (ens_.mode == EnsembleMode::kClassicalBranch) {
          b[m] = column(branch_exact_[m], sid);
        } else {
          b[m] = single(ens_.members[m].branch, u, derive_seed(spec_.seed, {1, m, usid}), -1, static_cast<int>(m), st);
        }
      }
    }
    for (std::size_t m = 0; m < L; ++m) preds[m][slot].assign(qidx.size(), 0.0);
    for (std::size_t k = 0; k < qidx.size(); ++k) {
      const int p = qidx[k];
      const auto up = static_cast<std::uint64_t>(p);
      std::vector<std::vector<double>> t(L);
      if (ens_.mode == EnsembleMode::kSPQC) {
        std::vector<std::vector<double>> f(L);
        for (std::size_t m = 0; m < L; ++m) f[m] = feature(m, p);
        t = superposed(trunks(), f, derive_seed(spec_.seed, {4, usid, up}), p, st);
      } else {
        for (std::size_t m = 0; m < L; ++m) {
          if (ens_.mode == EnsembleMode::kClassicalTrunk) {
            t[m] = column(trunk_exact_[m], p);
          } else {
            t[m] = single(ens_.members[m].trunk, feature(m, p), derive_seed(spec_.seed, {2, m, usid, up}), p,
                          static_cast<int>(m), st);
          }
        }
      }
      for (std::size_t m = 0; m < L; ++m) {
        double acc = 0.0;
        for (std::size_t j = 0; j < b[m].size(); ++j) acc += b[m][j] * t[m][j];
        preds[m][slot][k] = acc;
      }
    }
  }

 private:
  // Matrices are row-major, so columns are strided and copied element-wise.
  static std::vector<double> column(const Matrix& mat, Eigen::Index c) {
    std::vector<double> v(static_cast<std::size_t>(mat.rows()));
    for (Eigen::Index r = 0; r < mat.rows(); ++r) v[static_cast<std::size_t>(r)] = mat(r, c);
    return v;
  }
  std::vector<double> feature(std::size_t m, int p) const { return column(trunk_inputs_[m], p); }
  std::vector<const QOrthoNN*> branches() const {
    std::vector<const QOrthoNN*> v;
    for (const auto& m : ens_.members) v.push_back(&m.branch);
    return v;
  }
  std::vector<const QOrthoNN*> trunks() const {
    std::vector<const QOrthoNN*> v;
    for (const auto& m : ens_.members) v.push_back(&m.trunk);
    return v;
  }

  // pool >= 0 marks a trunk evaluation whose first layer can use the cache.
  std::vector<double> single(const QOrthoNN& net, const std::vector<double>& raw, std::uint64_t seed, int pool,
                             int member, RunStats& st) {
    const LayerExecutor exec = [&](const QuantumLayer& layer, int l, std::span<const double> x, std::uint64_t s) {
      const RBSCircuit c = tomography_circuit(layer.layout, layer.angles, x);
      std::shared_ptr<const OutcomeProbabilities> dist;
      if (l == 0 && pool >= 0 && cache_layer0_)
        dist = cache_.get({member, pool}, [&] { return outcome_distribution(c, spec_.noise, spec_.oracle); });
      const auto est = run_superposed(c, 1, layer.out_dim(), spec_.noise, s, spec_.method, spec_.oracle, dist.get());
      st.add(est[0]);
      return est[0].y;
    };
    return forward_with_executor(net, raw, exec, seed);
  }

  std::vector<std::vector<double>> superposed(const std::vector<const QOrthoNN*>& nets,
                                              const std::vector<std::vector<double>>& raw, std::uint64_t seed,
                                              int pool, RunStats& st) {
    const MembersExecutor exec = [&](int l, const std::vector<const QuantumLayer*>& layers,
                                     const std::vector<std::vector<double>>& x, std::uint64_t s) {
      std::vector<std::vector<double>> angles;
      for (const auto* ly : layers) angles.push_back(ly->angles);
      const auto& layout = layers.front()->layout;
      const RBSCircuit c = spqc_build(layout, angles, x);
      const int L = static_cast<int>(layers.size());
      std::shared_ptr<const OutcomeProbabilities> dist;
      if (l == 0 && pool >= 0 && cache_layer0_)
        dist = cache_.get({-1, pool}, [&] { return outcome_distribution(c, spec_.noise, spec_.oracle); });
      const auto est = run_superposed(c, L, layout.out_dim, spec_.noise, s, spec_.method, spec_.oracle, dist.get());
      st.add(est[0]);
      std::vector<std::vector<double>> y;
      for (const auto& e : est) y.push_back(e.y);
      return y;
    };
    return forward_members_with_executor(nets, raw, exec, seed);
  }

  const Ensemble& ens_;
  const OperatorDataset& ds_;
  const InferenceSpec& spec_;
  bool cache_layer0_ = false;
  std::vector<Matrix> trunk_inputs_;  // raw trunk features per member, features x pool
  std::vector<Matrix> branch_exact_;  // p x N
  std::vector<Matrix> trunk_exact_;   // p x pool
  DistributionCache cache_;
};

}  // namespace

EnsembleOutputs evaluate_ensemble(const Ensemble& ens, const OperatorDataset& ds, std::span<const int> scenarios,
                                  const InferenceSpec& spec) {
  if (ens.members.empty()) throw ConfigError("empty ensemble");
  spec.noise.validate();
  for (int s : scenarios)
    if (s < 0 || s >= ds.scenarios()) throw IndexError(fmt::format("scenario {} out of range", s));
  const std::size_t L = ens.members.size(), N = scenarios.size();
  EnsembleOutputs out;
  out.members.assign(L, std::vector<std::vector<double>>(N));

  if (!spec.uses_circuits()) {
    for (std::size_t m = 0; m < L; ++m) out.members[m] = predict_dataset(ens.members[m], ds, scenarios);
  } else {
    if (ens.mode == EnsembleMode::kSPQC)
      for (const auto& m : ens.members)
        for (std::size_t l = 0; l < m.branch.layers.size(); ++l)
          if (m.branch.layers[l].layout.width != ens.members[0].branch.layers[l].layout.width)
            throw ShapeError("superposed members must share layer shapes");
    Evaluator ev(ens, ds, spec);
    const int threads = std::clamp(spec.threads, 1, std::max(1, static_cast<int>(N)));
    std::vector<RunStats> stats(static_cast<std::size_t>(threads));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    std::atomic<std::size_t> next{0};
    auto worker = [&](int t) {
      try {
        for (std::size_t i; (i = next.fetch_add(1)) < N;)
          ev.scenario(scenarios[i], out.members, i, stats[static_cast<std::size_t>(t)]);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    };
    if (threads == 1) {
      worker(0);
    } else {
      std::vector<std::jthread> pool;
      for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    double r = 0.0;
    for (const auto& s : stats) {
      r += s.retained;
      out.circuits += s.circuits;
    }
    out.retained_fraction = out.circuits ? r / static_cast<double>(out.circuits) : 1.0;
  }

  out.mu.resize(N);
  out.sigma.resize(N);
  std::vector<double> buf(L);
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t Q = out.members[0][i].size();
    out.mu[i].resize(Q);
    out.sigma[i].resize(Q);
    for (std::size_t k = 0; k < Q; ++k) {
      for (std::size_t m = 0; m < L; ++m) buf[m] = out.members[m][i][k];
      const auto a = aggregate(buf);
      out.mu[i][k] = a.mu;
      out.sigma[i][k] = a.sigma;
    }
  }
  return out;
}

nlohmann::json ensemble_to_json(const Ensemble& ens) {
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : ens.members) {
    nlohmann::json f = nullptr;
    if (m.fourier) f = m.fourier->frequencies;
    members.push_back({{"branch", qonn_to_json(m.branch)}, {"trunk", qonn_to_json(m.trunk)}, {"fourier", f}});
  }
  const auto& a = ens.arch;
  return {{"format", "qdon-ensemble"},
          {"version", kEnsembleFormatVersion},
          {"mode", mode_name(ens.mode)},
          {"seeds", ens.seeds},
          {"arch",
           {{"branch_width", a.branch_width},
            {"trunk_width", a.trunk_width},
            {"layers", a.layers},
            {"residual", a.residual},
            {"latent", a.latent},
            {"fourier_k", a.fourier_k}}},
          {"members", members}};
}

Ensemble ensemble_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "qdon-ensemble") throw FormatError("not an ensemble checkpoint");
    if (j.at("version") != kEnsembleFormatVersion)
      throw FormatError(fmt::format("ensemble checkpoint version {} unsupported", j.at("version").dump()));
    Ensemble e;
    e.mode = mode_from_name(j.at("mode").get<std::string>());
    e.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    const auto& a = j.at("arch");
    e.arch = {a.at("branch_width"), a.at("trunk_width"), a.at("layers"), a.at("residual"), a.at("latent"),
              a.at("fourier_k")};
    for (const auto& m : j.at("members")) {
      DeepONetModel model;
      model.branch = qonn_from_json(m.at("branch"));
      model.trunk = qonn_from_json(m.at("trunk"));
      if (!m.at("fourier").is_null()) model.fourier = FourierFeatureSpec{m.at("fourier").get<std::vector<double>>()};
      if (model.branch.output_dim() != model.trunk.output_dim())
        throw FormatError("branch and trunk latent widths differ");
      e.members.push_back(std::move(model));
    }
    if (e.members.empty() || e.members.size() != e.seeds.size()) throw FormatError("member and seed counts differ");
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(fmt::format("malformed ensemble checkpoint: {}", ex.what()));
  } catch (const ConfigError& ex) {
    throw FormatError(ex.what());
  }
}

void save_ensemble(const Ensemble& ens, const std::filesystem::path& file) {
  write_file_atomic(file, ensemble_to_json(ens).dump(1) + "\n");
}

Ensemble load_ensemble(const std::filesystem::path& file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(fmt::format("{}: {}", file.string(), e.what()));
  }
  return ensemble_from_json(j);
}

}  // namespace qdon
