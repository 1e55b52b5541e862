#include "qdon/data/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include <fftw3.h>
#include <fmt/format.h>

#include "../fft_lock.hpp"
#include "qdon/errors.hpp"
#include "qdon/io.hpp"
#include "qdon/rng.hpp"

namespace qdon {

double KernelSpec::operator()(double a, double b) const {
  const double d = a - b;
  if (kind == KernelKind::kSquaredExponential) return std::exp(-d * d / (2.0 * length_scale * length_scale));
  const double s = std::sin(std::numbers::pi * std::abs(d) / period);
  return std::exp(-2.0 * s * s / (length_scale * length_scale));
}

Matrix grf_sample(const KernelSpec& kernel, std::span<const double> points, int count, std::uint64_t seed) {
  if (kernel.length_scale <= 0.0 || kernel.period <= 0.0) throw ConfigError("kernel scales must be positive");
  const auto P = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd K(P, P);
  for (Eigen::Index i = 0; i < P; ++i)
    for (Eigen::Index j = 0; j < P; ++j) K(i, j) = kernel(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)]);
  Eigen::MatrixXd Lf;
  bool ok = false;
  for (double jitter = 1e-10; jitter <= 1e-6 * 1.0001; jitter *= 10.0) {
    Eigen::LLT<Eigen::MatrixXd> llt(K + jitter * Eigen::MatrixXd::Identity(P, P));
    if (llt.info() == Eigen::Success) {
      Lf = llt.matrixL();
      ok = true;
      break;
    }
  }
  if (!ok) throw NumericalError("covariance factorisation failed even with 1e-6 jitter");
  Rng rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd Z(count, P);
  for (Eigen::Index i = 0; i < Z.size(); ++i) Z.data()[i] = g(rng);
  return Z * Lf.transpose();
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

std::vector<double> antiderivative(std::span<const double> v, double h) {
  std::vector<double> u(v.size(), 0.0);
  for (std::size_t i = 1; i < v.size(); ++i) u[i] = u[i - 1] + 0.5 * h * (v[i - 1] + v[i]);
  return u;
}

PeriodicInterpolant::PeriodicInterpolant(std::span<const double> samples)
    : r_(static_cast<int>(samples.size())), coef_(samples.size() / 2 + 1) {
  if (r_ < 1) throw ShapeError("periodic interpolant needs samples");
  std::vector<double> in(samples.begin(), samples.end());
  fftw_plan plan;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(r_, in.data(), reinterpret_cast<fftw_complex*>(coef_.data()), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  for (auto& c : coef_) c /= static_cast<double>(r_);
}

double PeriodicInterpolant::operator()(double x) const {
  const double w = 2.0 * std::numbers::pi * (x - std::floor(x));
  double acc = coef_[0].real();
  const int kmax = (r_ % 2 == 0) ? r_ / 2 - 1 : (r_ - 1) / 2;
  const std::complex<double> step(std::cos(w), std::sin(w));
  std::complex<double> e = step;
  for (int k = 1; k <= kmax; ++k) {
    acc += 2.0 * (coef_[static_cast<std::size_t>(k)] * e).real();
    e *= step;
  }
  if (r_ % 2 == 0 && r_ > 1) acc += coef_[static_cast<std::size_t>(r_ / 2)].real() * std::cos(0.5 * r_ * w);
  return acc;
}

std::vector<double> advection_solve(std::span<const double> u0, double t) {
  PeriodicInterpolant f(u0);
  const auto R = static_cast<int>(u0.size());
  std::vector<double> out(u0.size());
  for (int j = 0; j < R; ++j) {
    // Commensurate shifts land on grid points up to rounding; snap them.
    const double s = static_cast<double>(j) - t * R;
    const double r = std::round(s);
    if (std::abs(s - r) < 1e-9) {
      const int idx = ((static_cast<int>(r) % R) + R) % R;
      out[static_cast<std::size_t>(j)] = u0[static_cast<std::size_t>(idx)];
    } else {
      out[static_cast<std::size_t>(j)] = f(s / R);
    }
  }
  return out;
}

const char* task_name(TaskKind t) {
  switch (t) {
    case TaskKind::kAntiderivative: return "antiderivative";
    case TaskKind::kAdvection: return "advection";
    case TaskKind::kForecast: return "forecast";
    case TaskKind::kPointwiseOnline: return "pointwise_online";
  }
  return "?";
}

TaskKind task_from_name(const std::string& s) {
  for (TaskKind t : {TaskKind::kAntiderivative, TaskKind::kAdvection, TaskKind::kForecast, TaskKind::kPointwiseOnline})
    if (s == task_name(t)) return t;
  throw ConfigError(fmt::format("unknown task '{}'", s));
}

const char* split_name(SplitKind s) {
  switch (s) {
    case SplitKind::kTrain: return "train";
    case SplitKind::kCal: return "cal";
    case SplitKind::kTest: return "test";
  }
  return "?";
}

DatasetParams DatasetParams::defaults_for(TaskKind task) {
  DatasetParams p;
  p.task = task;
  switch (task) {
    case TaskKind::kAntiderivative:
      break;
    case TaskKind::kAdvection:
      p.d_u = 20;
      p.kernel = {KernelKind::kExpSineSquared, 1.0, 1.0};
      p.query_points = 50;
      p.n_train = 1000;
      p.n_cal = 200;
      p.n_test = 200;
      break;
    case TaskKind::kForecast:
      p.d_u = 11;
      break;
    case TaskKind::kPointwiseOnline:
      p.d_u = 11;
      break;
  }
  return p;
}

nlohmann::json DatasetParams::to_json() const {
  return {{"task", task_name(task)},
          {"d_u", d_u},
          {"kernel",
           {{"kind", kernel.kind == KernelKind::kSquaredExponential ? "squared_exponential" : "exp_sine_squared"},
            {"length_scale", kernel.length_scale},
            {"period", kernel.period}}},
          {"query_points", query_points},
          {"resolution", resolution},
          {"refine", refine},
          {"n_train", n_train},
          {"n_cal", n_cal},
          {"n_test", n_test},
          {"signal",
           {{"signals", signal.signals},
            {"length", signal.length},
            {"dt", signal.dt},
            {"base_frequencies", signal.base_frequencies},
            {"frequency_jitter", signal.frequency_jitter},
            {"noise", signal.noise}}},
          {"horizon", horizon},
          {"forecast_points", forecast_points},
          {"window_stride", window_stride},
          {"train_fraction", train_fraction},
          {"cal_fraction", cal_fraction}};
}

DatasetParams DatasetParams::from_json(const nlohmann::json& j) {
  DatasetParams p = defaults_for(task_from_name(j.at("task").get<std::string>()));
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  opt("d_u", p.d_u);
  opt("query_points", p.query_points);
  opt("resolution", p.resolution);
  opt("refine", p.refine);
  opt("n_train", p.n_train);
  opt("n_cal", p.n_cal);
  opt("n_test", p.n_test);
  opt("horizon", p.horizon);
  opt("forecast_points", p.forecast_points);
  opt("window_stride", p.window_stride);
  opt("train_fraction", p.train_fraction);
  opt("cal_fraction", p.cal_fraction);
  if (j.contains("kernel")) {
    const auto& k = j.at("kernel");
    if (k.contains("kind")) {
      const auto kind = k.at("kind").get<std::string>();
      if (kind == "squared_exponential") p.kernel.kind = KernelKind::kSquaredExponential;
      else if (kind == "exp_sine_squared") p.kernel.kind = KernelKind::kExpSineSquared;
      else throw ConfigError(fmt::format("unknown kernel '{}'", kind));
    }
    if (k.contains("length_scale")) p.kernel.length_scale = k.at("length_scale").get<double>();
    if (k.contains("period")) p.kernel.period = k.at("period").get<double>();
  }
  if (j.contains("signal")) {
    const auto& s = j.at("signal");
    if (s.contains("signals")) p.signal.signals = s.at("signals").get<int>();
    if (s.contains("length")) p.signal.length = s.at("length").get<int>();
    if (s.contains("dt")) p.signal.dt = s.at("dt").get<double>();
    if (s.contains("base_frequencies")) p.signal.base_frequencies = s.at("base_frequencies").get<std::vector<double>>();
    if (s.contains("frequency_jitter")) p.signal.frequency_jitter = s.at("frequency_jitter").get<double>();
    if (s.contains("noise")) p.signal.noise = s.at("noise").get<double>();
  }
  return p;
}

std::vector<int> OperatorDataset::scenarios_in(SplitKind s) const {
  std::vector<int> out;
  for (int i = 0; i < scenarios(); ++i)
    if (split[static_cast<std::size_t>(i)] == s) out.push_back(i);
  return out;
}

bool OperatorDataset::shared_queries() const {
  for (const auto& q : query_index)
    if (q != query_index.front()) return false;
  return true;
}

void OperatorDataset::validate() const {
  const auto N = static_cast<std::size_t>(branch.rows());
  if (branch.cols() != d_u || queries.cols() != d_y) throw FormatError("dataset feature widths disagree");
  if (query_index.size() != N || targets.size() != N || split.size() != N)
    throw FormatError("dataset scenario counts disagree");
  for (std::size_t i = 0; i < N; ++i) {
    if (query_index[i].size() != targets[i].size()) throw FormatError("query/target count mismatch");
    for (int q : query_index[i])
      if (q < 0 || q >= queries.rows()) throw FormatError("query index out of range");
    for (double t : targets[i])
      if (!std::isfinite(t)) throw FormatError("non-finite target");
  }
  if (!branch.allFinite() || !queries.allFinite()) throw FormatError("non-finite inputs");
}

namespace {

void assign_splits(OperatorDataset& ds, int n_train, int n_cal) {
  ds.split.resize(static_cast<std::size_t>(ds.branch.rows()));
  for (int i = 0; i < ds.scenarios(); ++i)
    ds.split[static_cast<std::size_t>(i)] =
        i < n_train ? SplitKind::kTrain : (i < n_train + n_cal ? SplitKind::kCal : SplitKind::kTest);
}

OperatorDataset build_antiderivative(const DatasetParams& p, std::uint64_t seed) {
  const int N = p.n_train + p.n_cal + p.n_test;
  const int M = p.query_points;
  const int F = (M - 1) * p.refine + 1;
  const auto fine = linspace(0.0, 1.0, F);
  const auto sensors = linspace(0.0, 1.0, p.d_u);
  // Sample on the union of the fine grid and the sensor locations.
  std::vector<double> pts = fine;
  std::vector<std::size_t> sensor_at(sensors.size());
  for (std::size_t s = 0; s < sensors.size(); ++s) {
    auto it = std::find_if(fine.begin(), fine.end(), [&](double x) { return std::abs(x - sensors[s]) < 1e-12; });
    if (it != fine.end()) {
      sensor_at[s] = static_cast<std::size_t>(it - fine.begin());
    } else {
      sensor_at[s] = pts.size();
      pts.push_back(sensors[s]);
    }
  }
  const Matrix v = grf_sample(p.kernel, pts, N, derive_seed(seed, {1}));
  OperatorDataset ds;
  ds.task = TaskKind::kAntiderivative;
  ds.d_u = p.d_u;
  ds.d_y = 1;
  ds.branch.resize(N, p.d_u);
  ds.queries.resize(M, 1);
  const auto grid = linspace(0.0, 1.0, M);
  for (int j = 0; j < M; ++j) ds.queries(j, 0) = grid[static_cast<std::size_t>(j)];
  std::vector<int> all(static_cast<std::size_t>(M));
  std::iota(all.begin(), all.end(), 0);
  const double h = 1.0 / (F - 1);
  for (int i = 0; i < N; ++i) {
    for (int s = 0; s < p.d_u; ++s) ds.branch(i, s) = v(i, static_cast<Eigen::Index>(sensor_at[static_cast<std::size_t>(s)]));
    std::vector<double> vf(static_cast<std::size_t>(F));
    for (int k = 0; k < F; ++k) vf[static_cast<std::size_t>(k)] = v(i, k);
    const auto u = antiderivative(vf, h);
    std::vector<double> t(static_cast<std::size_t>(M));
    for (int j = 0; j < M; ++j) t[static_cast<std::size_t>(j)] = u[static_cast<std::size_t>(j * p.refine)];
    ds.query_index.push_back(all);
    ds.targets.push_back(std::move(t));
  }
  assign_splits(ds, p.n_train, p.n_cal);
  return ds;
}

OperatorDataset build_advection(const DatasetParams& p, std::uint64_t seed) {
  const int N = p.n_train + p.n_cal + p.n_test;
  const int R = p.resolution;
  std::vector<double> grid(static_cast<std::size_t>(R));
  for (int j = 0; j < R; ++j) grid[static_cast<std::size_t>(j)] = static_cast<double>(j) / R;
  const Matrix u0 = grf_sample(p.kernel, grid, N, derive_seed(seed, {2}));
  const int Q = p.query_points;
  const auto xs = linspace(0.0, 1.0, Q), ts = linspace(0.0, 1.0, Q);
  OperatorDataset ds;
  ds.task = TaskKind::kAdvection;
  ds.d_u = p.d_u;
  ds.d_y = 2;
  ds.branch.resize(N, p.d_u);
  ds.queries.resize(static_cast<Eigen::Index>(Q) * Q, 2);
  for (int a = 0; a < Q; ++a)
    for (int b = 0; b < Q; ++b) {
      ds.queries(a * Q + b, 0) = xs[static_cast<std::size_t>(a)];
      ds.queries(a * Q + b, 1) = ts[static_cast<std::size_t>(b)];
    }
  std::vector<int> all(static_cast<std::size_t>(Q) * Q);
  std::iota(all.begin(), all.end(), 0);
  for (int i = 0; i < N; ++i) {
    std::vector<double> row(static_cast<std::size_t>(R));
    for (int j = 0; j < R; ++j) row[static_cast<std::size_t>(j)] = u0(i, j);
    PeriodicInterpolant f(row);
    for (int s = 0; s < p.d_u; ++s) ds.branch(i, s) = f(static_cast<double>(s) / p.d_u);
    std::vector<double> t(all.size());
    for (std::size_t k = 0; k < all.size(); ++k) t[k] = f(ds.queries(static_cast<Eigen::Index>(k), 0) - ds.queries(static_cast<Eigen::Index>(k), 1));
    ds.query_index.push_back(all);
    ds.targets.push_back(std::move(t));
  }
  assign_splits(ds, p.n_train, p.n_cal);
  return ds;
}

Matrix synth_signals(const SignalSpec& s, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> g;
  Matrix out(s.signals, s.length);
  for (int i = 0; i < s.signals; ++i) {
    struct Tone {
      double amp, decay, freq, phase;
    };
    std::vector<Tone> tones;
    for (double f : s.base_frequencies)
      tones.push_back({0.5 + u01(rng), 0.5 + 1.5 * u01(rng), f * (1.0 + s.frequency_jitter * (2 * u01(rng) - 1)),
                       2 * std::numbers::pi * u01(rng)});
    for (int k = 0; k < s.length; ++k) {
      const double t = k * s.dt;
      double v = 0.0;
      for (const auto& tone : tones)
        v += tone.amp * std::exp(-tone.decay * t) * std::sin(2 * std::numbers::pi * tone.freq * t + tone.phase);
      out(i, k) = v + s.noise * g(rng);
    }
  }
  return out;
}

std::vector<int> signal_split_order(int signals, bool shuffle, std::uint64_t seed) {
  std::vector<int> order(static_cast<std::size_t>(signals));
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  return order;
}

SplitKind split_of_rank(int rank, int total, double train_fraction, double cal_fraction) {
  const int n_train = static_cast<int>(std::round(train_fraction * total));
  const int n_cal = static_cast<int>(std::round(cal_fraction * total));
  return rank < n_train ? SplitKind::kTrain : (rank < n_train + n_cal ? SplitKind::kCal : SplitKind::kTest);
}

Matrix gather_rows(const Matrix& m, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

OperatorDataset build_forecast(const DatasetParams& p, std::uint64_t seed) {
  const SignalSpec& s = p.signal;
  const Matrix sig = synth_signals(s, derive_seed(seed, {3}));
  const int tau = p.d_u - 1;
  OperatorDataset ds;
  ds.task = TaskKind::kForecast;
  ds.d_u = p.d_u;
  ds.d_y = 1;
  ds.queries.resize(p.forecast_points, 1);
  std::vector<int> idx(static_cast<std::size_t>(p.forecast_points));
  for (int j = 0; j < p.forecast_points; ++j) {
    ds.queries(j, 0) = (j + 1) * s.dt;
    idx[static_cast<std::size_t>(j)] = j;
  }
  const auto order = signal_split_order(s.signals, true, derive_seed(seed, {4}));
  std::vector<std::vector<double>> rows;
  std::vector<int> train_signals;
  for (int rank = 0; rank < s.signals; ++rank) {
    const int sgn = order[static_cast<std::size_t>(rank)];
    const SplitKind sk = split_of_rank(rank, s.signals, p.train_fraction, p.cal_fraction);
    if (sk == SplitKind::kTrain) train_signals.push_back(sgn);
    for (int t0 = tau; t0 + p.forecast_points < s.length; t0 += p.window_stride) {
      std::vector<double> w(static_cast<std::size_t>(p.d_u));
      for (int k = 0; k < p.d_u; ++k) w[static_cast<std::size_t>(k)] = sig(sgn, t0 - tau + k);
      std::vector<double> t(static_cast<std::size_t>(p.forecast_points));
      for (int j = 0; j < p.forecast_points; ++j) t[static_cast<std::size_t>(j)] = sig(sgn, t0 + j + 1);
      rows.push_back(std::move(w));
      ds.query_index.push_back(idx);
      ds.targets.push_back(std::move(t));
      ds.split.push_back(sk);
    }
  }
  ds.series = gather_rows(sig, train_signals);
  ds.branch.resize(static_cast<Eigen::Index>(rows.size()), p.d_u);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int k = 0; k < p.d_u; ++k) ds.branch(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
  return ds;
}

OperatorDataset build_online(const DatasetParams& p, std::uint64_t seed) {
  const SignalSpec& s = p.signal;
  const Matrix sig = synth_signals(s, derive_seed(seed, {5}));
  const int tau = p.d_u - 1, h = p.horizon;
  if (s.length - tau - h < 1) throw ConfigError("signal too short for the window and horizon");
  OperatorDataset ds;
  ds.task = TaskKind::kPointwiseOnline;
  ds.d_u = p.d_u;
  ds.d_y = 1;
  // Query pool: every target time that can occur.
  ds.queries.resize(s.length - tau - h, 1);
  for (int t = tau; t + h < s.length; ++t) ds.queries(t - tau, 0) = (t + h) * s.dt;
  std::vector<std::vector<double>> rows;
  std::vector<int> train_signals;
  for (int sgn = 0; sgn < s.signals; ++sgn) {
    // Signals arrive in order, so splits are chronological by signal.
    const SplitKind sk = split_of_rank(sgn, s.signals, p.train_fraction, p.cal_fraction);
    if (sk == SplitKind::kTrain) train_signals.push_back(sgn);
    for (int t = tau; t + h < s.length; ++t) {
      std::vector<double> w(static_cast<std::size_t>(p.d_u));
      for (int k = 0; k < p.d_u; ++k) w[static_cast<std::size_t>(k)] = sig(sgn, t - tau + k);
      rows.push_back(std::move(w));
      ds.query_index.push_back({t - tau});
      ds.targets.push_back({sig(sgn, t + h)});
      ds.split.push_back(sk);
    }
  }
  ds.series = gather_rows(sig, train_signals);
  ds.branch.resize(static_cast<Eigen::Index>(rows.size()), p.d_u);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int k = 0; k < p.d_u; ++k) ds.branch(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
  return ds;
}

}  // namespace

OperatorDataset build_operator_dataset(const DatasetParams& p, std::uint64_t seed) {
  if (p.d_u < 1) throw ConfigError("d_u must be positive");
  OperatorDataset ds;
  switch (p.task) {
    case TaskKind::kAntiderivative:
      if (p.query_points < 2 || p.refine < 1) throw ConfigError("antiderivative grid too small");
      ds = build_antiderivative(p, seed);
      break;
    case TaskKind::kAdvection:
      if (p.resolution < 2 || p.query_points < 1) throw ConfigError("advection grid too small");
      ds = build_advection(p, seed);
      break;
    case TaskKind::kForecast:
      ds = build_forecast(p, seed);
      break;
    case TaskKind::kPointwiseOnline:
      ds = build_online(p, seed);
      break;
  }
  ds.seed = seed;
  ds.params = p.to_json();
  ds.validate();
  return ds;
}

void save_dataset(const OperatorDataset& ds, const std::filesystem::path& stem) {
  ds.validate();
  const std::string base = stem.string();
  std::string b = "scenario,split";
  for (int k = 0; k < ds.d_u; ++k) b += fmt::format(",u{}", k);
  b += '\n';
  for (int i = 0; i < ds.scenarios(); ++i) {
    b += fmt::format("{},{}", i, split_name(ds.split[static_cast<std::size_t>(i)]));
    for (int k = 0; k < ds.d_u; ++k) b += fmt::format(",{:.17g}", ds.branch(i, k));
    b += '\n';
  }
  std::string q = "query";
  for (int k = 0; k < ds.d_y; ++k) q += fmt::format(",y{}", k);
  q += '\n';
  for (Eigen::Index j = 0; j < ds.queries.rows(); ++j) {
    q += fmt::format("{}", j);
    for (int k = 0; k < ds.d_y; ++k) q += fmt::format(",{:.17g}", ds.queries(j, k));
    q += '\n';
  }
  std::string t = "scenario,query,target\n";
  for (int i = 0; i < ds.scenarios(); ++i)
    for (std::size_t k = 0; k < ds.query_index[static_cast<std::size_t>(i)].size(); ++k)
      t += fmt::format("{},{},{:.17g}\n", i, ds.query_index[static_cast<std::size_t>(i)][k],
                       ds.targets[static_cast<std::size_t>(i)][k]);
  nlohmann::json meta = {{"format", "qdon-dataset"},
                         {"version", kDatasetFormatVersion},
                         {"task", task_name(ds.task)},
                         {"d_u", ds.d_u},
                         {"d_y", ds.d_y},
                         {"scenarios", ds.scenarios()},
                         {"pool", ds.queries.rows()},
                         {"seed", ds.seed},
                         {"params", ds.params},
                         {"series_rows", ds.series.rows()}};
  if (ds.series.rows() > 0) {
    std::string sr;
    for (Eigen::Index i = 0; i < ds.series.rows(); ++i) {
      for (Eigen::Index k = 0; k < ds.series.cols(); ++k) sr += fmt::format("{}{:.17g}", k ? "," : "", ds.series(i, k));
      sr += '\n';
    }
    write_file_atomic(base + "_series.csv", sr);
  }
  write_file_atomic(base + "_branch.csv", b);
  write_file_atomic(base + "_queries.csv", q);
  write_file_atomic(base + "_targets.csv", t);
  write_file_atomic(base + ".json", meta.dump(2) + "\n");
}

OperatorDataset load_dataset(const std::filesystem::path& stem) {
  const std::string base = stem.string();
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(base + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("dataset sidecar unreadable: {}", e.what()));
  }
  if (meta.value("format", "") != "qdon-dataset") throw FormatError("not a dataset sidecar");
  if (meta.value("version", -1) != kDatasetFormatVersion)
    throw FormatError(fmt::format("dataset version {} unsupported", meta.value("version", -1)));
  OperatorDataset ds;
  ds.task = task_from_name(meta.at("task").get<std::string>());
  ds.d_u = meta.at("d_u").get<int>();
  ds.d_y = meta.at("d_y").get<int>();
  ds.seed = meta.at("seed").get<std::uint64_t>();
  ds.params = meta.at("params");
  const int N = meta.at("scenarios").get<int>();
  const auto P = meta.at("pool").get<Eigen::Index>();
  if (const auto rows = meta.value("series_rows", 0); rows > 0) {
    const auto srows = parse_csv(read_file(base + "_series.csv"));
    if (srows.size() != static_cast<std::size_t>(rows)) throw FormatError("series file has the wrong row count");
    ds.series.resize(rows, static_cast<Eigen::Index>(srows[0].size()));
    for (int i = 0; i < rows; ++i) {
      if (srows[static_cast<std::size_t>(i)].size() != static_cast<std::size_t>(ds.series.cols()))
        throw FormatError("series row width mismatch");
      for (Eigen::Index k = 0; k < ds.series.cols(); ++k)
        ds.series(i, k) = parse_double(srows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
    }
  }

  const auto brows = parse_csv(read_file(base + "_branch.csv"));
  if (brows.size() != static_cast<std::size_t>(N) + 1) throw FormatError("branch file has the wrong row count");
  ds.branch.resize(N, ds.d_u);
  ds.split.resize(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    const auto& r = brows[static_cast<std::size_t>(i) + 1];
    if (r.size() != static_cast<std::size_t>(ds.d_u) + 2) throw FormatError("branch row width mismatch");
    const std::string& sp = r[1];
    ds.split[static_cast<std::size_t>(i)] =
        sp == "train" ? SplitKind::kTrain : sp == "cal" ? SplitKind::kCal : sp == "test" ? SplitKind::kTest
                                                                                         : throw FormatError("bad split label");
    for (int k = 0; k < ds.d_u; ++k) ds.branch(i, k) = parse_double(r[static_cast<std::size_t>(k) + 2]);
  }
  const auto qrows = parse_csv(read_file(base + "_queries.csv"));
  if (qrows.size() != static_cast<std::size_t>(P) + 1) throw FormatError("query file has the wrong row count");
  ds.queries.resize(P, ds.d_y);
  for (Eigen::Index j = 0; j < P; ++j) {
    const auto& r = qrows[static_cast<std::size_t>(j) + 1];
    if (r.size() != static_cast<std::size_t>(ds.d_y) + 1) throw FormatError("query row width mismatch");
    for (int k = 0; k < ds.d_y; ++k) ds.queries(j, k) = parse_double(r[static_cast<std::size_t>(k) + 1]);
  }
  ds.query_index.assign(static_cast<std::size_t>(N), {});
  ds.targets.assign(static_cast<std::size_t>(N), {});
  const auto trows = parse_csv(read_file(base + "_targets.csv"));
  for (std::size_t r = 1; r < trows.size(); ++r) {
    if (trows[r].size() != 3) throw FormatError("target row width mismatch");
    const auto i = parse_int(trows[r][0]);
    if (i < 0 || i >= N) throw FormatError("target scenario out of range");
    ds.query_index[static_cast<std::size_t>(i)].push_back(static_cast<int>(parse_int(trows[r][1])));
    ds.targets[static_cast<std::size_t>(i)].push_back(parse_double(trows[r][2]));
  }
  ds.validate();
  return ds;
}

}  // namespace qdon
