#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "qdon/linalg.hpp"
#include "qdon/unary/layers.hpp"

namespace qdon {

/// Per-feature min-max bounds fitted on training data.
struct NormalizationSpec {
  std::vector<double> lower;
  std::vector<double> upper;

  /// `samples` holds one sample per column. Constant features get a unit
  /// half-width around their value so that max > min always holds.
  static NormalizationSpec fit(const Matrix& samples);

  int features() const noexcept { return static_cast<int>(lower.size()); }
  int width() const noexcept { return features() + 1; }
};

/// Maps x to [-1, 1]^d, scales by 1/sqrt(d) and appends the slack entry so the
/// result has unit norm. Values outside the fitted bounds are clamped; the
/// count of features clamped beyond a 1e-9 tolerance is added to `clamped`.
std::vector<double> normalize_input(std::span<const double> x, const NormalizationSpec& spec,
                                    long* clamped = nullptr);
Matrix normalize_batch(const Matrix& x, const NormalizationSpec& spec, long* clamped = nullptr);

enum class Activation { kIdentity, kSiLU };

double activate(Activation a, double z);
double activate_grad(Activation a, double z);

struct QuantumLayer {
  PyramidLayout layout;
  std::vector<double> angles;
  Activation activation = Activation::kSiLU;
  bool residual = false;
  double input_scale = 1.0;  // applied to the incoming vector before the rotation

  int in_dim() const noexcept { return layout.in_dim; }
  int out_dim() const noexcept { return layout.out_dim; }
};

struct LayerCache {
  Matrix input;     // in_dim x B, before scaling
  Matrix rotated;   // width x B, full register after the Givens sweep
  Matrix preact;    // out_dim x B
};

/// Exact batched forward pass: act(W (s x)) (+ x when residual).
Matrix layer_forward(const QuantumLayer& layer, const Matrix& x, LayerCache* cache = nullptr);

struct LayerGrad {
  std::vector<double> angles;
  Matrix input;  // d loss / d x
};

/// Reverse Givens sweep. Each gate's pre-image is recovered by the inverse
/// rotation, so only the post-sweep register has to be cached.
LayerGrad layer_backward(const QuantumLayer& layer, const LayerCache& cache, const Matrix& grad_out);

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;
};

struct QOrthoArch {
  int input_features = 1;
  int hidden_width = 1;    // layer width before the slack wire is added
  int quantum_layers = 1;
  int output_dim = 1;
  bool residual = false;
  Activation activation = Activation::kSiLU;
};

/// Stacked orthogonal layers followed by a dense read-out head. The first
/// layer maps the (features + 1)-wide normalised input to hidden_width + 1
/// wires; later layers are square and rescale their input by 1/sqrt(width).
struct QOrthoNN {
  NormalizationSpec normalization;
  std::vector<QuantumLayer> layers;
  DenseLayer head;

  int input_features() const noexcept { return normalization.features(); }
  int output_dim() const noexcept { return static_cast<int>(head.weight.rows()); }
  std::size_t parameter_count() const;
};

QOrthoNN make_qorthonn(const QOrthoArch& arch, NormalizationSpec normalization, std::uint64_t seed);

struct NetCache {
  Matrix normalized;
  std::vector<LayerCache> layers;
  Matrix head_input;
};

/// Exact forward pass on already-normalised inputs (width x B).
Matrix forward_normalized(const QOrthoNN& net, const Matrix& normalized, NetCache* cache = nullptr);

/// Exact forward pass on raw inputs (features x B).
Matrix qonn_forward(const QOrthoNN& net, const Matrix& raw);

struct NetGrad {
  std::vector<std::vector<double>> angles;
  Matrix head_weight;
  Vector head_bias;
};

NetGrad qonn_backward(const QOrthoNN& net, const NetCache& cache, const Matrix& grad_out);

/// Evaluates the unitary part of one layer on a unit-norm vector. Arguments:
/// the layer, its index in the network, the input, and a per-call seed.
using LayerExecutor = std::function<std::vector<double>(const QuantumLayer&, int, std::span<const double>,
                                                        std::uint64_t)>;

/// Single-sample forward pass that delegates every W x product to `exec`.
/// Each layer input is loaded as x / ||x|| and the estimate rescaled by
/// ||x||, since amplitude encoding needs a unit vector.
std::vector<double> forward_with_executor(const QOrthoNN& net, std::span<const double> raw,
                                          const LayerExecutor& exec, std::uint64_t seed);

/// Layer-synchronous variant for several networks of identical shape: layer
/// l of every member is handed to `exec` in one call, which is what a
/// superposed execution of all members needs. Arguments: layer index, the
/// members' layers, their unit-norm inputs, and a per-layer seed.
using MembersExecutor = std::function<std::vector<std::vector<double>>(
    int, const std::vector<const QuantumLayer*>&, const std::vector<std::vector<double>>&, std::uint64_t)>;

std::vector<std::vector<double>> forward_members_with_executor(const std::vector<const QOrthoNN*>& nets,
                                                               const std::vector<std::vector<double>>& raw,
                                                               const MembersExecutor& exec, std::uint64_t seed);

// Flat parameter views used by the optimiser.
std::size_t flat_size(const QOrthoNN& net);
void pack(const QOrthoNN& net, std::span<double> out);
void unpack(QOrthoNN& net, std::span<const double> in);
void pack_grad(const NetGrad& g, std::span<double> out);

}  // namespace qdon
