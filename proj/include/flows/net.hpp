#pragma once

#include <span>
#include <string>
#include <vector>

#include "flows/param.hpp"
#include "flows/rng.hpp"
#include "flows/tape.hpp"

namespace flows {

// A dense layer referencing weight/bias arrays by name inside a ParamSet.
struct LayerRef {
  std::string w, b;
  int in = 0, out = 0;
  Activation act = Activation::kIdentity;
};

struct MlpRef {
  std::vector<LayerRef> layers;
  int in_dim() const { return layers.empty() ? 0 : layers.front().in; }
  int out_dim() const { return layers.empty() ? 0 : layers.back().out; }
};

// Registers parameter arrays for a feed-forward stack `prefix.l<i>.{w,b}` and
// returns the reference structure. Hidden activations use `hidden_act`; the
// final layer uses `out_act`.
MlpRef make_mlp(ParamSet& params, const std::string& prefix, std::span<const int> dims,
                Activation hidden_act, Activation out_act);

// He-style scaled random init for every layer; final-layer weights can be
// damped via out_scale (0 gives an exactly-zero last layer).
void init_mlp(ParamSet& params, const MlpRef& mlp, Rng& rng, double out_scale = 1.0);

// Feed-forward evaluation on the tape. Dimension mismatches raise ConfigError.
NodeId mlp_apply(Tape& tape, NodeId input, const ParamSet& params, const MlpRef& mlp);

// Convenience plain-vector evaluation (scratch tape inside).
std::vector<double> mlp_apply(std::span<const double> input, const ParamSet& params,
                              const MlpRef& mlp);

// [sin(w_i x), cos(w_i x)] for `freqs` geometrically spaced angular rates in
// [w_lo, w_hi]; output length 2*freqs.
std::vector<double> sinusoidal_embedding(double x, int freqs, double w_lo = 1.0,
                                         double w_hi = 16.0);

}  // namespace flows
