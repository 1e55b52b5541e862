#include "qdon/opnet/deeponet.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include <fftw3.h>
#include <fmt/format.h>

#include "../fft_lock.hpp"
#include "qdon/errors.hpp"
#include "qdon/rng.hpp"

namespace qdon {

std::vector<double> fourier_features(double t, const FourierFeatureSpec& spec) {
  std::vector<double> f;
  f.reserve(static_cast<std::size_t>(spec.output_dim()));
  f.push_back(t);
  for (double fr : spec.frequencies) {
    const double w = 2.0 * std::numbers::pi * fr * t;
    f.push_back(std::cos(w));
    f.push_back(std::sin(w));
  }
  return f;
}

std::vector<double> dominant_frequencies(const Matrix& signals, double dt, int k) {
  const auto n = static_cast<int>(signals.cols());
  if (n < 4 || signals.rows() < 1) throw ShapeError("need at least one signal of length >= 4");
  if (k < 1) throw ConfigError("number of frequencies must be positive");
  const int bins = n / 2 + 1;
  std::vector<double> in(static_cast<std::size_t>(n));
  std::vector<std::complex<double>> out(static_cast<std::size_t>(bins));
  fftw_plan plan;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
  }
  std::vector<double> mag(static_cast<std::size_t>(bins), 0.0);
  for (Eigen::Index r = 0; r < signals.rows(); ++r) {
    const double mean = signals.row(r).mean();
    for (int i = 0; i < n; ++i) {
      const double w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / (n - 1)));
      in[static_cast<std::size_t>(i)] = w * (signals(r, i) - mean);
    }
    fftw_execute(plan);
    for (int b = 0; b < bins; ++b) mag[static_cast<std::size_t>(b)] += std::abs(out[static_cast<std::size_t>(b)]);
  }
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  std::vector<int> peaks;
  for (int b = 1; b + 1 < bins; ++b)
    if (mag[static_cast<std::size_t>(b)] > mag[static_cast<std::size_t>(b) - 1] &&
        mag[static_cast<std::size_t>(b)] >= mag[static_cast<std::size_t>(b) + 1])
      peaks.push_back(b);
  std::sort(peaks.begin(), peaks.end(),
            [&](int a, int b) { return mag[static_cast<std::size_t>(a)] > mag[static_cast<std::size_t>(b)]; });
  const double top = peaks.empty() ? 0.0 : mag[static_cast<std::size_t>(peaks.front())];
  std::vector<double> freqs;
  for (int b : peaks) {
    if (static_cast<int>(freqs.size()) == k) break;
    if (mag[static_cast<std::size_t>(b)] < 0.01 * top) break;
    freqs.push_back(b / (n * dt));
  }
  if (static_cast<int>(freqs.size()) < k)
    throw NumericalError(fmt::format("only {} spectral peaks found, {} requested", freqs.size(), k));
  return freqs;
}

Matrix DeepONetModel::trunk_features(const Matrix& y) const {
  if (!fourier) return y.transpose();
  if (y.cols() != 1) throw ShapeError("Fourier features need a scalar trunk input");
  Matrix f(fourier->output_dim(), y.rows());
  for (Eigen::Index p = 0; p < y.rows(); ++p) {
    const auto v = fourier_features(y(p, 0), *fourier);
    for (std::size_t k = 0; k < v.size(); ++k) f(static_cast<Eigen::Index>(k), p) = v[k];
  }
  return f;
}

DeepONetModel make_deeponet(const DeepONetArch& arch, const OperatorDataset& ds, std::uint64_t seed) {
  if (arch.latent < 1) throw ConfigError("latent width must be positive");
  const auto train = ds.scenarios_in(SplitKind::kTrain);
  if (train.empty()) throw ConfigError("dataset has no training scenarios");
  DeepONetModel m;
  if (arch.fourier_k > 0) {
    if (ds.d_y != 1) throw ConfigError("Fourier features need a one-dimensional trunk input");
    // Prefer the full training signals; fall back to the branch windows.
    Matrix sig = ds.series;
    if (sig.rows() == 0) {
      sig.resize(static_cast<Eigen::Index>(train.size()), ds.d_u);
      for (std::size_t i = 0; i < train.size(); ++i) sig.row(static_cast<Eigen::Index>(i)) = ds.branch.row(train[i]);
    }
    const double dt = ds.params.contains("signal") ? ds.params["signal"].value("dt", 1.0) : 1.0;
    m.fourier = FourierFeatureSpec{dominant_frequencies(sig, dt, arch.fourier_k)};
  }
  Matrix u(ds.d_u, static_cast<Eigen::Index>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) u.col(static_cast<Eigen::Index>(i)) = ds.branch.row(train[i]).transpose();
  std::vector<char> used(static_cast<std::size_t>(ds.queries.rows()), 0);
  for (int i : train)
    for (int q : ds.query_index[static_cast<std::size_t>(i)]) used[static_cast<std::size_t>(q)] = 1;
  Matrix yrows(std::count(used.begin(), used.end(), 1), ds.d_y);
  for (Eigen::Index p = 0, r = 0; p < ds.queries.rows(); ++p)
    if (used[static_cast<std::size_t>(p)]) yrows.row(r++) = ds.queries.row(p);
  const Matrix tf = m.trunk_features(yrows);
  QOrthoArch ba{ds.d_u, arch.branch_width, arch.layers, arch.latent, arch.residual, Activation::kSiLU};
  QOrthoArch ta{static_cast<int>(tf.rows()), arch.trunk_width, arch.layers, arch.latent, arch.residual,
                Activation::kSiLU};
  m.branch = make_qorthonn(ba, NormalizationSpec::fit(u), derive_seed(seed, {11}));
  m.trunk = make_qorthonn(ta, NormalizationSpec::fit(tf), derive_seed(seed, {12}));
  return m;
}

double predict(const DeepONetModel& model, std::span<const double> u, std::span<const double> y) {
  Matrix uu = Eigen::Map<const Matrix>(u.data(), static_cast<Eigen::Index>(u.size()), 1);
  Matrix yy = Eigen::Map<const Matrix>(y.data(), 1, static_cast<Eigen::Index>(y.size()));
  const Matrix b = qonn_forward(model.branch, uu);
  const Matrix t = qonn_forward(model.trunk, model.trunk_features(yy));
  return b.col(0).dot(t.col(0));
}

Matrix predict_grid(const DeepONetModel& model, const Matrix& u, const Matrix& y) {
  const Matrix b = qonn_forward(model.branch, u.transpose());
  const Matrix t = qonn_forward(model.trunk, model.trunk_features(y));
  // Explicit dot products keep grid results bit-identical to predict().
  Matrix out(b.cols(), t.cols());
  for (Eigen::Index i = 0; i < b.cols(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j) out(i, j) = b.col(i).dot(t.col(j));
  return out;
}

std::vector<std::vector<double>> predict_dataset(const DeepONetModel& model, const OperatorDataset& ds,
                                                 std::span<const int> scenarios) {
  Matrix u(static_cast<Eigen::Index>(scenarios.size()), ds.d_u);
  for (std::size_t i = 0; i < scenarios.size(); ++i) u.row(static_cast<Eigen::Index>(i)) = ds.branch.row(scenarios[i]);
  const Matrix b = qonn_forward(model.branch, u.transpose());
  const Matrix t = qonn_forward(model.trunk, model.trunk_features(ds.queries));
  std::vector<std::vector<double>> out(scenarios.size());
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto& idx = ds.query_index[static_cast<std::size_t>(scenarios[i])];
    out[i].resize(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k)
      out[i][k] = b.col(static_cast<Eigen::Index>(i)).dot(t.col(idx[k]));
  }
  return out;
}

LossKind loss_from_name(const std::string& s) {
  if (s == "mse") return LossKind::kMSE;
  if (s == "rel_l2") return LossKind::kRelL2;
  throw ConfigError(fmt::format("unknown loss '{}'", s));
}

namespace {
constexpr double kRelEps = 1e-8;
}

double loss(const std::vector<std::vector<double>>& pred, const std::vector<std::vector<double>>& tgt, LossKind kind) {
  if (pred.size() != tgt.size() || pred.empty()) throw ShapeError("prediction/target scenario mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != tgt[i].size()) throw ShapeError("prediction/target length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < pred[i].size(); ++k) {
      const double d = pred[i][k] - tgt[i][k];
      num += d * d;
      den += tgt[i][k] * tgt[i][k];
    }
    if (kind == LossKind::kMSE)
      acc += pred[i].empty() ? 0.0 : num / static_cast<double>(pred[i].size());
    else
      acc += std::sqrt(num) / (std::sqrt(den) + kRelEps);
  }
  return acc / static_cast<double>(pred.size());
}

double AdamConfig::rate_at(long iteration) const {
  double r = lr;
  if (gamma) r = lr * std::pow(*gamma, static_cast<double>(iteration));
  if (min_lr) r = std::max(r, *min_lr);
  return r;
}

Adam::Adam(AdamConfig cfg, std::size_t size) : cfg_(cfg), m1_(size, 0.0), m2_(size, 0.0) {}

double Adam::step(std::span<double> theta, std::span<const double> grad) {
  if (theta.size() != m1_.size() || grad.size() != m1_.size()) throw ShapeError("optimizer size mismatch");
  const double lr = cfg_.rate_at(t_);
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < theta.size(); ++k) {
    m1_[k] = cfg_.beta1 * m1_[k] + (1.0 - cfg_.beta1) * grad[k];
    m2_[k] = cfg_.beta2 * m2_[k] + (1.0 - cfg_.beta2) * grad[k] * grad[k];
    theta[k] -= lr * (m1_[k] / c1) / (std::sqrt(m2_[k] / c2) + cfg_.eps);
  }
  return lr;
}

std::string LossTrace::to_csv() const {
  std::string s = "iteration,loss,lr\n";
  for (std::size_t i = 0; i < loss.size(); ++i) s += fmt::format("{},{:.17g},{:.17g}\n", i, loss[i], lr[i]);
  return s;
}

namespace {

Matrix gather_cols(const Matrix& m, const std::vector<int>& cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(cols[k]);
  return out;
}

std::vector<int> sample_without_replacement(int n, int k, Rng& rng) {
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  if (k <= 0 || k >= n) return all;
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> d(i, n - 1);
    std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(d(rng))]);
  }
  all.resize(static_cast<std::size_t>(k));
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

TrainResult train(DeepONetModel model, const OperatorDataset& ds, const TrainConfig& cfg, std::uint64_t seed) {
  const auto train_ids = ds.scenarios_in(SplitKind::kTrain);
  if (train_ids.empty()) throw ConfigError("no training scenarios");
  if (cfg.iterations < 0) throw ConfigError("negative iteration count");
  const int n_train = static_cast<int>(train_ids.size());

  Matrix u(ds.d_u, n_train);
  for (int i = 0; i < n_train; ++i) u.col(i) = ds.branch.row(train_ids[static_cast<std::size_t>(i)]).transpose();
  const Matrix xb_all = normalize_batch(u, model.branch.normalization);
  const Matrix xt_all = normalize_batch(model.trunk_features(ds.queries), model.trunk.normalization);
  const bool shared = ds.shared_queries();
  const std::vector<int>& shared_q = ds.query_index[static_cast<std::size_t>(train_ids.front())];

  const std::size_t nb = flat_size(model.branch), nt = flat_size(model.trunk);
  std::vector<double> theta(nb + nt), grad(nb + nt);
  Adam opt(cfg.adam, theta.size());
  pack(model.branch, std::span(theta).first(nb));
  pack(model.trunk, std::span(theta).subspan(nb));

  Rng rng(derive_seed(seed, {21}));
  TrainResult res;
  res.trace.loss.reserve(static_cast<std::size_t>(cfg.iterations));
  res.trace.lr.reserve(static_cast<std::size_t>(cfg.iterations));

  for (long it = 0; it < cfg.iterations; ++it) {
    const auto batch = sample_without_replacement(n_train, cfg.batch_scenarios, rng);
    const int nS = static_cast<int>(batch.size());
    const Matrix xb = nS == n_train ? xb_all : gather_cols(xb_all, batch);

    // Pool columns touched by this batch and, per scenario, (column, target).
    std::vector<int> cols;
    std::vector<std::vector<std::pair<int, double>>> pairs;
    if (shared) {
      const auto pick = sample_without_replacement(static_cast<int>(shared_q.size()), cfg.batch_queries, rng);
      for (int k : pick) cols.push_back(shared_q[static_cast<std::size_t>(k)]);
      pairs.resize(static_cast<std::size_t>(nS));
      for (int s = 0; s < nS; ++s) {
        const auto& tg = ds.targets[static_cast<std::size_t>(train_ids[static_cast<std::size_t>(batch[static_cast<std::size_t>(s)])])];
        for (std::size_t c = 0; c < pick.size(); ++c) pairs[static_cast<std::size_t>(s)].push_back({static_cast<int>(c), tg[static_cast<std::size_t>(pick[c])]});
      }
    } else {
      std::vector<int> slot(static_cast<std::size_t>(ds.queries.rows()), -1);
      pairs.resize(static_cast<std::size_t>(nS));
      for (int s = 0; s < nS; ++s) {
        const auto sid = static_cast<std::size_t>(train_ids[static_cast<std::size_t>(batch[static_cast<std::size_t>(s)])]);
        for (std::size_t k = 0; k < ds.query_index[sid].size(); ++k) {
          const int q = ds.query_index[sid][k];
          if (slot[static_cast<std::size_t>(q)] < 0) {
            slot[static_cast<std::size_t>(q)] = static_cast<int>(cols.size());
            cols.push_back(q);
          }
          pairs[static_cast<std::size_t>(s)].push_back({slot[static_cast<std::size_t>(q)], ds.targets[sid][k]});
        }
      }
    }
    const Matrix xt = gather_cols(xt_all, cols);

    NetCache cb, ct;
    const Matrix B = forward_normalized(model.branch, xb, &cb);
    const Matrix T = forward_normalized(model.trunk, xt, &ct);
    const Matrix P = B.transpose() * T;  // nS x |cols|

    Matrix G = Matrix::Zero(P.rows(), P.cols());
    double L = 0.0;
    for (int s = 0; s < nS; ++s) {
      const auto& pr = pairs[static_cast<std::size_t>(s)];
      if (pr.empty()) continue;
      if (cfg.loss == LossKind::kMSE) {
        const double w = 1.0 / static_cast<double>(pr.size() * static_cast<std::size_t>(nS));
        for (const auto& [c, t] : pr) {
          const double d = P(s, c) - t;
          L += w * d * d;
          G(s, c) += 2.0 * w * d;
        }
      } else {
        double num = 0.0, den = 0.0;
        for (const auto& [c, t] : pr) {
          num += (P(s, c) - t) * (P(s, c) - t);
          den += t * t;
        }
        const double r = std::sqrt(num), sn = std::sqrt(den) + kRelEps;
        L += r / sn / nS;
        if (r > 0.0)
          for (const auto& [c, t] : pr) G(s, c) += (P(s, c) - t) / (r * sn * nS);
      }
    }
    if (!std::isfinite(L))
      throw NumericalError(fmt::format("non-finite loss at iteration {} (lr {})", it, cfg.adam.rate_at(it)));

    const Matrix dB = T * G.transpose();
    const Matrix dT = B * G;
    pack_grad(qonn_backward(model.branch, cb, dB), std::span(grad).first(nb));
    pack_grad(qonn_backward(model.trunk, ct, dT), std::span(grad).subspan(nb));

    const double lr = opt.step(theta, grad);
    unpack(model.branch, std::span<const double>(theta).first(nb));
    unpack(model.trunk, std::span<const double>(theta).subspan(nb));
    res.trace.loss.push_back(L);
    res.trace.lr.push_back(lr);
  }
  res.model = std::move(model);
  return res;
}

}  // namespace qdon
