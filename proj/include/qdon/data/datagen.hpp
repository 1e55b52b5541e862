#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdon/linalg.hpp"

namespace qdon {

enum class KernelKind { kSquaredExponential, kExpSineSquared };

struct KernelSpec {
  KernelKind kind = KernelKind::kSquaredExponential;
  double length_scale = 0.2;
  double period = 1.0;  // exp-sine-squared only

  double operator()(double a, double b) const;
};

/// `count` zero-mean Gaussian-process draws at `points`, one sample per row.
/// The covariance is factored by Cholesky with a diagonal jitter that starts
/// at 1e-10 and grows tenfold up to 1e-6 before giving up.
Matrix grf_sample(const KernelSpec& kernel, std::span<const double> points, int count, std::uint64_t seed);

std::vector<double> linspace(double a, double b, int n);

/// Cumulative trapezoid rule on a uniform grid with spacing h, starting at 0.
std::vector<double> antiderivative(std::span<const double> values, double h);

/// Trigonometric interpolant of samples taken at j / R on the unit circle.
/// Shifts by multiples of 1/R reproduce circularly shifted samples.
class PeriodicInterpolant {
 public:
  explicit PeriodicInterpolant(std::span<const double> samples);
  double operator()(double x) const;

 private:
  int r_;
  std::vector<std::complex<double>> coef_;  // k = 0 .. R/2
};

/// Solution of u_t + u_x = 0 on the periodic unit interval, sampled on the
/// same uniform grid as `u0`.
std::vector<double> advection_solve(std::span<const double> u0, double t);

enum class TaskKind { kAntiderivative, kAdvection, kForecast, kPointwiseOnline };
enum class SplitKind : int { kTrain = 0, kCal = 1, kTest = 2 };

const char* task_name(TaskKind t);
TaskKind task_from_name(const std::string& s);
const char* split_name(SplitKind s);

/// Synthetic stand-in for the power-grid transients: sums of damped sines with
/// a shared set of base frequencies, per-signal jitter and measurement noise.
struct SignalSpec {
  int signals = 40;
  int length = 100;
  double dt = 0.01;
  std::vector<double> base_frequencies{3.0, 7.0, 12.0};
  double frequency_jitter = 0.02;
  double noise = 0.01;
};

struct DatasetParams {
  TaskKind task = TaskKind::kAntiderivative;
  int d_u = 10;              // sensors, or window length for signal tasks
  KernelSpec kernel;
  int query_points = 100;    // antiderivative grid / advection points per axis
  int resolution = 100;      // advection periodic grid
  int refine = 4;            // antiderivative fine-grid factor
  int n_train = 200, n_cal = 50, n_test = 50;  // function tasks
  SignalSpec signal;
  int horizon = 1;           // online: steps ahead
  int forecast_points = 10;  // forecast: future samples per window
  int window_stride = 5;     // forecast: spacing between window ends
  double train_fraction = 0.8, cal_fraction = 0.1;  // signal tasks

  static DatasetParams defaults_for(TaskKind task);
  nlohmann::json to_json() const;
  static DatasetParams from_json(const nlohmann::json& j);
};

/// Operator-learning samples. Query locations live in one shared pool;
/// scenario i evaluates the pool rows listed in query_index[i].
struct OperatorDataset {
  TaskKind task = TaskKind::kAntiderivative;
  int d_u = 0;
  int d_y = 0;
  Matrix branch;   // N x d_u
  Matrix queries;  // P x d_y
  std::vector<std::vector<int>> query_index;
  std::vector<std::vector<double>> targets;
  std::vector<SplitKind> split;
  std::uint64_t seed = 0;
  nlohmann::json params;
  // Full training-split signals for the signal tasks (one per row), kept so
  // spectral analysis is not limited to the short branch windows.
  Matrix series;

  int scenarios() const noexcept { return static_cast<int>(split.size()); }
  std::vector<int> scenarios_in(SplitKind s) const;
  /// True when every scenario uses the same query list (grid tasks).
  bool shared_queries() const;
  void validate() const;
};

OperatorDataset build_operator_dataset(const DatasetParams& params, std::uint64_t seed);

inline constexpr int kDatasetFormatVersion = 1;

/// Writes <stem>.json plus <stem>_branch.csv, <stem>_queries.csv and
/// <stem>_targets.csv with round-trip precision.
void save_dataset(const OperatorDataset& ds, const std::filesystem::path& stem);
OperatorDataset load_dataset(const std::filesystem::path& stem);

}  // namespace qdon
