#pragma once

#include <vector>

#include "flows/net.hpp"
#include "flows/scene.hpp"

namespace flows {

// Maps (flattened history, map features) to the per-agent context vector that
// conditions the prior and the displacement field.
struct EncoderRef {
  MlpRef mlp;
  int history_steps = 0;
  int context_dim = 0;
};

EncoderRef make_encoder(ParamSet& params, const RunConfig& cfg);
void init_encoder(ParamSet& params, const EncoderRef& enc, Rng& rng);

NodeId encode(Tape& tape, const SceneSample& scene, const ParamSet& params,
              const EncoderRef& enc);
std::vector<double> encode(const SceneSample& scene, const ParamSet& params,
                           const EncoderRef& enc);

}  // namespace flows
