#include "qdon/qonn/qonn.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "qdon/errors.hpp"
#include "qdon/rng.hpp"

namespace qdon {

NormalizationSpec NormalizationSpec::fit(const Matrix& samples) {
  if (samples.rows() < 1 || samples.cols() < 1) throw ShapeError("cannot fit bounds on an empty sample set");
  NormalizationSpec s;
  for (Eigen::Index f = 0; f < samples.rows(); ++f) {
    double lo = samples.row(f).minCoeff(), hi = samples.row(f).maxCoeff();
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw NumericalError("non-finite training feature");
    if (hi - lo < 1e-12) {
      lo -= 1.0;
      hi += 1.0;
    }
    s.lower.push_back(lo);
    s.upper.push_back(hi);
  }
  return s;
}

std::vector<double> normalize_input(std::span<const double> x, const NormalizationSpec& spec, long* clamped) {
  const int d = spec.features();
  if (static_cast<int>(x.size()) != d)
    throw ShapeError(fmt::format("expected {} input features, got {}", d, x.size()));
  std::vector<double> out(static_cast<std::size_t>(d) + 1);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  double sq = 0.0;
  for (int i = 0; i < d; ++i) {
    const auto k = static_cast<std::size_t>(i);
    double z = 2.0 * (x[k] - spec.lower[k]) / (spec.upper[k] - spec.lower[k]) - 1.0;
    if (std::abs(z) > 1.0) {
      if (clamped && std::abs(z) > 1.0 + 1e-9) ++*clamped;
      z = std::copysign(1.0, z);
    }
    out[k] = z * scale;
    sq += out[k] * out[k];
  }
  out[static_cast<std::size_t>(d)] = std::sqrt(std::max(0.0, 1.0 - sq));
  return out;
}

Matrix normalize_batch(const Matrix& x, const NormalizationSpec& spec, long* clamped) {
  Matrix out(spec.width(), x.cols());
  std::vector<double> col(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index b = 0; b < x.cols(); ++b) {
    for (Eigen::Index f = 0; f < x.rows(); ++f) col[static_cast<std::size_t>(f)] = x(f, b);
    const auto v = normalize_input(col, spec, clamped);
    for (Eigen::Index f = 0; f < out.rows(); ++f) out(f, b) = v[static_cast<std::size_t>(f)];
  }
  return out;
}

double activate(Activation a, double z) {
  if (a == Activation::kIdentity) return z;
  return z / (1.0 + std::exp(-z));
}

double activate_grad(Activation a, double z) {
  if (a == Activation::kIdentity) return 1.0;
  const double sig = 1.0 / (1.0 + std::exp(-z));
  return sig * (1.0 + z * (1.0 - sig));
}

namespace {

void givens_rows(Matrix& R, int a, double c, double s) {
  auto ra = R.row(a);
  auto rb = R.row(a + 1);
  const Eigen::Index B = R.cols();
  double* pa = ra.data();
  double* pb = rb.data();
  for (Eigen::Index k = 0; k < B; ++k) {
    const double x = pa[k], y = pb[k];
    pa[k] = c * x + s * y;
    pb[k] = -s * x + c * y;
  }
}

void check_layer_input(const QuantumLayer& layer, const Matrix& x) {
  if (x.rows() != layer.in_dim())
    throw ShapeError(fmt::format("layer expects {} input rows, got {}", layer.in_dim(), x.rows()));
}

}  // namespace

Matrix layer_forward(const QuantumLayer& layer, const Matrix& x, LayerCache* cache) {
  check_layer_input(layer, x);
  const auto& L = layer.layout;
  Matrix R = Matrix::Zero(L.width, x.cols());
  R.middleRows(L.input_offset(), L.in_dim) = layer.input_scale * x;
  for (std::size_t g = 0; g < L.gates.size(); ++g)
    givens_rows(R, L.gates[g].wire, std::cos(layer.angles[g]), std::sin(layer.angles[g]));
  Matrix z = R.bottomRows(L.out_dim);
  Matrix y = z.unaryExpr([&](double v) { return activate(layer.activation, v); });
  if (layer.residual) {
    if (L.out_dim != L.in_dim) throw ShapeError("residual connection needs a square layer");
    y += x;
  }
  if (cache) {
    cache->input = x;
    cache->rotated = std::move(R);
    cache->preact = std::move(z);
  }
  return y;
}

LayerGrad layer_backward(const QuantumLayer& layer, const LayerCache& cache, const Matrix& grad_out) {
  const auto& L = layer.layout;
  const Eigen::Index B = grad_out.cols();
  Matrix G = Matrix::Zero(L.width, B);
  G.bottomRows(L.out_dim) =
      grad_out.cwiseProduct(cache.preact.unaryExpr([&](double v) { return activate_grad(layer.activation, v); }));
  Matrix Y = cache.rotated;
  LayerGrad out;
  out.angles.assign(L.gates.size(), 0.0);
  for (std::size_t g = L.gates.size(); g-- > 0;) {
    const int a = L.gates[g].wire;
    const double c = std::cos(layer.angles[g]), s = std::sin(layer.angles[g]);
    double* ya = Y.row(a).data();
    double* yb = Y.row(a + 1).data();
    double* ga = G.row(a).data();
    double* gb = G.row(a + 1).data();
    double acc = 0.0;
    for (Eigen::Index k = 0; k < B; ++k) {
      const double pa = ya[k], pb = yb[k], da = ga[k], db = gb[k];
      acc += da * pb - db * pa;
      ya[k] = c * pa - s * pb;  // undo the rotation
      yb[k] = s * pa + c * pb;
      ga[k] = c * da - s * db;
      gb[k] = s * da + c * db;
    }
    out.angles[g] = acc;
  }
  out.input = layer.input_scale * G.middleRows(L.input_offset(), L.in_dim);
  if (layer.residual) out.input += grad_out;
  return out;
}

std::size_t QOrthoNN::parameter_count() const { return flat_size(*this); }

QOrthoNN make_qorthonn(const QOrthoArch& arch, NormalizationSpec normalization, std::uint64_t seed) {
  if (arch.input_features < 1 || arch.hidden_width < 1 || arch.quantum_layers < 1 || arch.output_dim < 1)
    throw ConfigError("architecture sizes must be positive");
  if (normalization.features() != arch.input_features)
    throw ShapeError("normalization width does not match the input feature count");
  QOrthoNN net;
  net.normalization = std::move(normalization);
  Rng rng(seed);
  std::uniform_real_distribution<double> ang(-std::numbers::pi / 2, std::numbers::pi / 2);
  const int width = arch.hidden_width + 1;
  for (int l = 0; l < arch.quantum_layers; ++l) {
    QuantumLayer layer;
    layer.layout = pyramid_layout(width, l == 0 ? arch.input_features + 1 : width);
    layer.angles.resize(layer.layout.angle_count());
    for (double& t : layer.angles) t = ang(rng);
    layer.activation = arch.activation;
    layer.residual = l > 0 && arch.residual;
    layer.input_scale = l == 0 ? 1.0 : 1.0 / std::sqrt(static_cast<double>(width));
    net.layers.push_back(std::move(layer));
  }
  const double limit = std::sqrt(6.0 / (width + arch.output_dim));
  std::uniform_real_distribution<double> w(-limit, limit);
  net.head.weight = Matrix(arch.output_dim, width);
  for (Eigen::Index i = 0; i < net.head.weight.size(); ++i) net.head.weight.data()[i] = w(rng);
  net.head.bias = Vector::Zero(arch.output_dim);
  return net;
}

Matrix forward_normalized(const QOrthoNN& net, const Matrix& normalized, NetCache* cache) {
  if (cache) {
    cache->normalized = normalized;
    cache->layers.resize(net.layers.size());
  }
  Matrix h = normalized;
  for (std::size_t l = 0; l < net.layers.size(); ++l)
    h = layer_forward(net.layers[l], h, cache ? &cache->layers[l] : nullptr);
  // Fixed summation order so a column's output never depends on batch size.
  Matrix out(net.head.weight.rows(), h.cols());
  for (Eigen::Index c = 0; c < h.cols(); ++c)
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      double acc = net.head.bias(i);
      for (Eigen::Index j = 0; j < h.rows(); ++j) acc += net.head.weight(i, j) * h(j, c);
      out(i, c) = acc;
    }
  if (cache) cache->head_input = std::move(h);
  return out;
}

Matrix qonn_forward(const QOrthoNN& net, const Matrix& raw) {
  return forward_normalized(net, normalize_batch(raw, net.normalization));
}

NetGrad qonn_backward(const QOrthoNN& net, const NetCache& cache, const Matrix& grad_out) {
  NetGrad g;
  g.head_weight = grad_out * cache.head_input.transpose();
  g.head_bias = grad_out.rowwise().sum();
  Matrix up = net.head.weight.transpose() * grad_out;
  g.angles.resize(net.layers.size());
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    auto lg = layer_backward(net.layers[l], cache.layers[l], up);
    g.angles[l] = std::move(lg.angles);
    up = std::move(lg.input);
  }
  return g;
}

namespace {

std::vector<double> head_apply(const QOrthoNN& net, const std::vector<double>& v) {
  std::vector<double> out(static_cast<std::size_t>(net.output_dim()));
  for (int i = 0; i < net.output_dim(); ++i) {
    double acc = net.head.bias(i);
    for (std::size_t j = 0; j < v.size(); ++j) acc += net.head.weight(i, static_cast<Eigen::Index>(j)) * v[j];
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> forward_members_with_executor(const std::vector<const QOrthoNN*>& nets,
                                                               const std::vector<std::vector<double>>& raw,
                                                               const MembersExecutor& exec, std::uint64_t seed) {
  if (nets.empty() || nets.size() != raw.size()) throw ShapeError("one raw input per network is required");
  const std::size_t depth = nets.front()->layers.size();
  for (const auto* n : nets)
    if (n->layers.size() != depth) throw ShapeError("member networks differ in depth");
  const std::size_t L = nets.size();
  std::vector<std::vector<double>> v(L);
  for (std::size_t m = 0; m < L; ++m) v[m] = normalize_input(raw[m], nets[m]->normalization);
  for (std::size_t l = 0; l < depth; ++l) {
    std::vector<const QuantumLayer*> layers(L);
    std::vector<std::vector<double>> units(L);
    std::vector<double> norms(L);
    for (std::size_t m = 0; m < L; ++m) {
      const QuantumLayer& layer = nets[m]->layers[l];
      layers[m] = &layer;
      units[m].resize(v[m].size());
      double sq = 0.0;
      for (std::size_t i = 0; i < v[m].size(); ++i) {
        units[m][i] = layer.input_scale * v[m][i];
        sq += units[m][i] * units[m][i];
      }
      norms[m] = std::sqrt(sq);
      if (norms[m] > 0.0) {
        for (double& e : units[m]) e /= norms[m];
      } else {
        // Any unit vector will do: its estimate is scaled by zero below.
        std::fill(units[m].begin(), units[m].end(), 0.0);
        units[m].front() = 1.0;
      }
    }
    const auto w = exec(static_cast<int>(l), layers, units, derive_seed(seed, {l}));
    if (w.size() != L) throw ShapeError("executor returned the wrong member count");
    for (std::size_t m = 0; m < L; ++m) {
      const QuantumLayer& layer = *layers[m];
      if (w[m].size() != static_cast<std::size_t>(layer.out_dim())) throw ShapeError("executor output width mismatch");
      std::vector<double> next(w[m].size());
      for (std::size_t j = 0; j < next.size(); ++j) {
        next[j] = activate(layer.activation, norms[m] * w[m][j]);
        if (layer.residual) next[j] += v[m][j];
      }
      v[m] = std::move(next);
    }
  }
  std::vector<std::vector<double>> out(L);
  for (std::size_t m = 0; m < L; ++m) out[m] = head_apply(*nets[m], v[m]);
  return out;
}

std::vector<double> forward_with_executor(const QOrthoNN& net, std::span<const double> raw,
                                          const LayerExecutor& exec, std::uint64_t seed) {
  const MembersExecutor one = [&](int l, const std::vector<const QuantumLayer*>& layers,
                                  const std::vector<std::vector<double>>& x, std::uint64_t s) {
    return std::vector<std::vector<double>>{exec(*layers[0], l, x[0], s)};
  };
  return forward_members_with_executor({&net}, {std::vector<double>(raw.begin(), raw.end())}, one, seed).front();
}

std::size_t flat_size(const QOrthoNN& net) {
  std::size_t n = 0;
  for (const auto& l : net.layers) n += l.angles.size();
  return n + static_cast<std::size_t>(net.head.weight.size() + net.head.bias.size());
}

void pack(const QOrthoNN& net, std::span<double> out) {
  std::size_t k = 0;
  for (const auto& l : net.layers)
    for (double t : l.angles) out[k++] = t;
  for (Eigen::Index i = 0; i < net.head.weight.size(); ++i) out[k++] = net.head.weight.data()[i];
  for (Eigen::Index i = 0; i < net.head.bias.size(); ++i) out[k++] = net.head.bias(i);
}

void unpack(QOrthoNN& net, std::span<const double> in) {
  std::size_t k = 0;
  for (auto& l : net.layers)
    for (double& t : l.angles) t = in[k++];
  for (Eigen::Index i = 0; i < net.head.weight.size(); ++i) net.head.weight.data()[i] = in[k++];
  for (Eigen::Index i = 0; i < net.head.bias.size(); ++i) net.head.bias(i) = in[k++];
}

void pack_grad(const NetGrad& g, std::span<double> out) {
  std::size_t k = 0;
  for (const auto& a : g.angles)
    for (double t : a) out[k++] = t;
  for (Eigen::Index i = 0; i < g.head_weight.size(); ++i) out[k++] = g.head_weight.data()[i];
  for (Eigen::Index i = 0; i < g.head_bias.size(); ++i) out[k++] = g.head_bias(i);
}

}  // namespace qdon
