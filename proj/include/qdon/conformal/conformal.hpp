#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace qdon {

inline constexpr double kDefaultSigmaEpsilon = 1e-8;

double nonconformity(double s, double mu, double sigma, double epsilon = kDefaultSigmaEpsilon);

/// Rank used for the split-conformal quantile: ceil((n + 1)(1 - alpha)).
long conformal_rank(std::size_t n, double alpha);

/// The conformal_rank-th smallest score, or +infinity when that rank exceeds n.
double calibrate(std::span<const double> scores, double alpha);

struct ConformalCalibration {
  std::vector<double> scores;
  double alpha = 0.1;
  double epsilon = kDefaultSigmaEpsilon;
  double q_hat = std::numeric_limits<double>::infinity();

  std::size_t n_cal() const noexcept { return scores.size(); }
  nlohmann::json to_json() const;  // summary only: q_hat, alpha, epsilon, n_cal
  static ConformalCalibration from_json(const nlohmann::json& j);
};

/// Pools scores over every (scenario, query) pair of the calibration split.
ConformalCalibration fit_calibration(std::span<const double> targets, std::span<const double> mu,
                                     std::span<const double> sigma, double alpha,
                                     double epsilon = kDefaultSigmaEpsilon);

struct PredictionInterval {
  double center = 0.0;
  double half_width = 0.0;  // +inf marks an unbounded interval
  double lower() const noexcept { return center - half_width; }
  double upper() const noexcept { return center + half_width; }
  double width() const noexcept { return 2.0 * half_width; }
  bool bounded() const noexcept { return half_width < std::numeric_limits<double>::infinity(); }
  bool contains(double v) const noexcept { return lower() <= v && v <= upper(); }
};

PredictionInterval predict_interval(double mu, double sigma, double q_hat);

enum class PeakMode { kFullWidth, kHalfWidth };

struct IntervalMetrics {
  double coverage = 0.0;  // fraction in [0, 1]
  double avg_width = 0.0;
  double peak_uncertainty = 0.0;
};

IntervalMetrics interval_metrics(std::span<const double> targets, std::span<const PredictionInterval> intervals,
                                 PeakMode peak = PeakMode::kFullWidth);

/// Mean over scenarios of ||pred - true|| / ||true||, in percent.
double relative_l2_percent(const std::vector<std::vector<double>>& pred,
                           const std::vector<std::vector<double>>& truth);

}  // namespace qdon
