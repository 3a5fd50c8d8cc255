#include "flows/net.hpp"

#include <cmath>

#include "flows/errors.hpp"

namespace flows {

MlpRef make_mlp(ParamSet& params, const std::string& prefix, std::span<const int> dims,
                Activation hidden_act, Activation out_act) {
  if (dims.size() < 2) throw ConfigError("mlp '" + prefix + "' needs at least two dims");
  MlpRef ref;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    LayerRef layer;
    layer.in = dims[i];
    layer.out = dims[i + 1];
    layer.w = prefix + ".l" + std::to_string(i) + ".w";
    layer.b = prefix + ".l" + std::to_string(i) + ".b";
    layer.act = (i + 2 == dims.size()) ? out_act : hidden_act;
    params.add(layer.w, {static_cast<std::size_t>(layer.out), static_cast<std::size_t>(layer.in)});
    params.add(layer.b, {static_cast<std::size_t>(layer.out)});
    ref.layers.push_back(std::move(layer));
  }
  return ref;
}

void init_mlp(ParamSet& params, const MlpRef& mlp, Rng& rng, double out_scale) {
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    const LayerRef& layer = mlp.layers[i];
    const bool last = i + 1 == mlp.layers.size();
    const double gain = (last ? out_scale : 1.0) / std::sqrt(static_cast<double>(layer.in));
    for (double& v : params.by_name(layer.w).values) v = gain * rng.normal();
    for (double& v : params.by_name(layer.b).values) v = 0.0;
  }
}

NodeId mlp_apply(Tape& tape, NodeId input, const ParamSet& params, const MlpRef& mlp) {
  if (tape.size(input) != mlp.in_dim())
    throw ConfigError("mlp input length " + std::to_string(tape.size(input)) +
                      " does not match fan-in " + std::to_string(mlp.in_dim()));
  NodeId h = input;
  for (const LayerRef& layer : mlp.layers) {
    NodeId w = tape.param(params.by_name(layer.w));
    NodeId b = tape.param(params.by_name(layer.b));
    h = tape.activation(tape.affine(w, b, h, layer.out, layer.in), layer.act);
  }
  return h;
}

std::vector<double> mlp_apply(std::span<const double> input, const ParamSet& params,
                              const MlpRef& mlp) {
  Tape tape;
  return tape.value_copy(mlp_apply(tape, tape.input(input), params, mlp));
}

std::vector<double> sinusoidal_embedding(double x, int freqs, double w_lo, double w_hi) {
  std::vector<double> out(static_cast<std::size_t>(2 * freqs));
  for (int i = 0; i < freqs; ++i) {
    double w = freqs == 1 ? w_lo : w_lo * std::pow(w_hi / w_lo, static_cast<double>(i) / (freqs - 1));
    out[2 * i] = std::sin(w * x);
    out[2 * i + 1] = std::cos(w * x);
  }
  return out;
}

}  // namespace flows
