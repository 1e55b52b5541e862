#include "qdon/qonn/serialize.hpp"

#include <fmt/format.h>

#include "qdon/errors.hpp"

namespace qdon {

namespace {

const char* activation_name(Activation a) { return a == Activation::kSiLU ? "silu" : "identity"; }

Activation activation_from(const std::string& s) {
  if (s == "silu") return Activation::kSiLU;
  if (s == "identity") return Activation::kIdentity;
  throw FormatError(fmt::format("unknown activation '{}'", s));
}

}  // namespace

nlohmann::json qonn_to_json(const QOrthoNN& net) {
  nlohmann::json j;
  j["normalization"] = {{"lower", net.normalization.lower}, {"upper", net.normalization.upper}};
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& l : net.layers)
    layers.push_back({{"out", l.out_dim()},
                      {"in", l.in_dim()},
                      {"activation", activation_name(l.activation)},
                      {"residual", l.residual},
                      {"input_scale", l.input_scale},
                      {"angles", l.angles}});
  std::vector<double> w(net.head.weight.data(), net.head.weight.data() + net.head.weight.size());
  std::vector<double> b(net.head.bias.data(), net.head.bias.data() + net.head.bias.size());
  j["head"] = {{"rows", net.head.weight.rows()}, {"cols", net.head.weight.cols()}, {"weight", w}, {"bias", b}};
  return j;
}

QOrthoNN qonn_from_json(const nlohmann::json& j) {
  try {
    QOrthoNN net;
    net.normalization.lower = j.at("normalization").at("lower").get<std::vector<double>>();
    net.normalization.upper = j.at("normalization").at("upper").get<std::vector<double>>();
    if (net.normalization.lower.size() != net.normalization.upper.size())
      throw FormatError("normalization bounds differ in length");
    for (const auto& lj : j.at("layers")) {
      QuantumLayer l;
      l.layout = pyramid_layout(lj.at("out").get<int>(), lj.at("in").get<int>());
      l.angles = lj.at("angles").get<std::vector<double>>();
      if (l.angles.size() != l.layout.angle_count())
        throw FormatError(fmt::format("layer stores {} angles, layout needs {}", l.angles.size(),
                                      l.layout.angle_count()));
      l.activation = activation_from(lj.at("activation").get<std::string>());
      l.residual = lj.at("residual").get<bool>();
      l.input_scale = lj.at("input_scale").get<double>();
      net.layers.push_back(std::move(l));
    }
    const auto& h = j.at("head");
    const auto rows = h.at("rows").get<Eigen::Index>(), cols = h.at("cols").get<Eigen::Index>();
    const auto w = h.at("weight").get<std::vector<double>>();
    const auto b = h.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows)
      throw FormatError("dense head size mismatch");
    net.head.weight = Eigen::Map<const Matrix>(w.data(), rows, cols);
    net.head.bias = Eigen::Map<const Vector>(b.data(), rows);
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("malformed network checkpoint: {}", e.what()));
  }
}

}  // namespace qdon
