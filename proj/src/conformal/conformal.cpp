#include "qdon/conformal/conformal.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "qdon/errors.hpp"

namespace qdon {

double nonconformity(double s, double mu, double sigma, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (sigma < 0.0) throw ConfigError("sigma must be non-negative");
  return std::abs(s - mu) / (sigma + epsilon);
}

long conformal_rank(std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError(fmt::format("alpha {} outside (0, 1)", alpha));
  // Guard the ceiling against representation error, e.g. 11 * 0.9 = 9.9000000000000004.
  const double r = (static_cast<double>(n) + 1.0) * (1.0 - alpha);
  const double nearest = std::round(r);
  return static_cast<long>(std::abs(r - nearest) < 1e-9 ? nearest : std::ceil(r));
}

double calibrate(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw EstimationError("no calibration scores");
  const long k = conformal_rank(scores.size(), alpha);
  if (k > static_cast<long>(scores.size())) return std::numeric_limits<double>::infinity();
  std::vector<double> s(scores.begin(), scores.end());
  const auto nth = s.begin() + std::max(0L, k - 1);
  std::nth_element(s.begin(), nth, s.end());
  return *nth;
}

ConformalCalibration fit_calibration(std::span<const double> targets, std::span<const double> mu,
                                     std::span<const double> sigma, double alpha, double epsilon) {
  if (targets.size() != mu.size() || mu.size() != sigma.size()) throw ShapeError("calibration arrays misaligned");
  ConformalCalibration c;
  c.alpha = alpha;
  c.epsilon = epsilon;
  c.scores.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double r = nonconformity(targets[i], mu[i], sigma[i], epsilon);
    if (!std::isfinite(r)) throw NumericalError(fmt::format("non-finite score at calibration point {}", i));
    c.scores.push_back(r);
  }
  c.q_hat = calibrate(c.scores, alpha);
  return c;
}

nlohmann::json ConformalCalibration::to_json() const {
  nlohmann::json j{{"alpha", alpha}, {"epsilon", epsilon}, {"n_cal", n_cal()}};
  // JSON has no infinity; null stands for the unbounded sentinel.
  j["q_hat"] = std::isfinite(q_hat) ? nlohmann::json(q_hat) : nlohmann::json(nullptr);
  return j;
}

ConformalCalibration ConformalCalibration::from_json(const nlohmann::json& j) {
  try {
    ConformalCalibration c;
    c.alpha = j.at("alpha").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.q_hat = j.at("q_hat").is_null() ? std::numeric_limits<double>::infinity() : j.at("q_hat").get<double>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("calibration artifact: {}", e.what()));
  }
}

PredictionInterval predict_interval(double mu, double sigma, double q_hat) {
  if (sigma < 0.0) throw ConfigError("sigma must be non-negative");
  if (q_hat < 0.0 || std::isnan(q_hat)) throw ConfigError("q_hat must be non-negative");
  if (!std::isfinite(q_hat)) return {mu, std::numeric_limits<double>::infinity()};
  return {mu, q_hat * sigma};
}

IntervalMetrics interval_metrics(std::span<const double> targets, std::span<const PredictionInterval> intervals,
                                 PeakMode peak) {
  if (targets.size() != intervals.size()) throw ShapeError("targets and intervals misaligned");
  if (targets.empty()) throw EstimationError("empty test set");
  IntervalMetrics m;
  std::size_t inside = 0;
  double total = 0.0, widest = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    inside += intervals[i].contains(targets[i]) ? 1 : 0;
    total += intervals[i].width();
    widest = std::max(widest, intervals[i].width());
  }
  const auto n = static_cast<double>(targets.size());
  m.coverage = static_cast<double>(inside) / n;
  m.avg_width = total / n;
  m.peak_uncertainty = peak == PeakMode::kFullWidth ? widest : widest / 2.0;
  return m;
}

double relative_l2_percent(const std::vector<std::vector<double>>& pred,
                           const std::vector<std::vector<double>>& truth) {
  if (pred.size() != truth.size() || pred.empty()) throw ShapeError("prediction/target scenario mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != truth[i].size()) throw ShapeError("prediction/target length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < pred[i].size(); ++k) {
      num += (pred[i][k] - truth[i][k]) * (pred[i][k] - truth[i][k]);
      den += truth[i][k] * truth[i][k];
    }
    acc += std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
  }
  return 100.0 * acc / static_cast<double>(pred.size());
}

}  // namespace qdon
