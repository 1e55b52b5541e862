#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdon/data/datagen.hpp"
#include "qdon/linalg.hpp"
#include "qdon/qonn/qonn.hpp"

namespace qdon {

struct FourierFeatureSpec {
  std::vector<double> frequencies;  // Hz
  int output_dim() const noexcept { return 1 + 2 * static_cast<int>(frequencies.size()); }
};

/// [t, cos(2 pi f_1 t), sin(2 pi f_1 t), ..., cos(2 pi f_K t), sin(2 pi f_K t)]
std::vector<double> fourier_features(double t, const FourierFeatureSpec& spec);

/// K strongest spectral peaks of the mean (Hann-windowed, mean-removed)
/// magnitude spectrum over the rows of `signals`, DC excluded. A peak is a
/// strict local maximum; throws NumericalError when fewer than K peaks rise
/// above 1% of the largest one.
std::vector<double> dominant_frequencies(const Matrix& signals, double dt, int k);

struct DeepONetArch {
  int branch_width = 10;
  int trunk_width = 10;
  int layers = 2;
  bool residual = false;
  int latent = 10;
  int fourier_k = 0;  // > 0 enables trunk Fourier features (d_y must be 1)
};

struct DeepONetModel {
  QOrthoNN branch;
  QOrthoNN trunk;
  std::optional<FourierFeatureSpec> fourier;

  int latent() const noexcept { return branch.output_dim(); }

  /// Raw trunk features (features x P) for query rows `y` (P x d_y).
  Matrix trunk_features(const Matrix& y) const;
};

/// Fits input bounds on the training split and initialises both networks.
DeepONetModel make_deeponet(const DeepONetArch& arch, const OperatorDataset& ds, std::uint64_t seed);

double predict(const DeepONetModel& model, std::span<const double> u, std::span<const double> y);

/// Exact predictions for every (branch row, query row) pair: N x P.
Matrix predict_grid(const DeepONetModel& model, const Matrix& u, const Matrix& y);

/// Exact predictions for each scenario's own query list.
std::vector<std::vector<double>> predict_dataset(const DeepONetModel& model, const OperatorDataset& ds,
                                                 std::span<const int> scenarios);

enum class LossKind { kMSE, kRelL2 };

LossKind loss_from_name(const std::string& s);

double loss(const std::vector<std::vector<double>>& predictions, const std::vector<std::vector<double>>& targets,
            LossKind kind);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::optional<double> min_lr;
  std::optional<double> gamma;  // per-iteration multiplicative decay

  double rate_at(long iteration) const;
};

/// Adam with bias correction. step() applies one update and returns the
/// learning rate it used.
class Adam {
 public:
  Adam(AdamConfig cfg, std::size_t size);
  double step(std::span<double> theta, std::span<const double> grad);
  long iterations() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m1_, m2_;
  long t_ = 0;
};

struct TrainConfig {
  long iterations = 1000;
  AdamConfig adam;
  LossKind loss = LossKind::kMSE;
  int batch_scenarios = 0;  // 0: full batch
  int batch_queries = 0;    // 0: every query of each scenario
};

struct LossTrace {
  std::vector<double> loss;
  std::vector<double> lr;

  std::string to_csv() const;
};

struct TrainResult {
  DeepONetModel model;
  LossTrace trace;
};

/// Adam on the training split. Deterministic for a given seed; throws
/// NumericalError on a non-finite loss.
TrainResult train(DeepONetModel model, const OperatorDataset& ds, const TrainConfig& cfg, std::uint64_t seed);

}  // namespace qdon
