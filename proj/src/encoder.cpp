#include "flows/encoder.hpp"

#include "flows/errors.hpp"

namespace flows {

EncoderRef make_encoder(ParamSet& params, const RunConfig& cfg) {
  EncoderRef enc;
  enc.history_steps = cfg.history_steps;
  enc.context_dim = cfg.context_dim;
  const int in = 2 * cfg.history_steps + kMapFeatureLen;
  const int dims[] = {in, cfg.enc_hidden, cfg.enc_hidden, cfg.context_dim};
  enc.mlp = make_mlp(params, "enc", dims, Activation::kSoftplus, Activation::kIdentity);
  return enc;
}

void init_encoder(ParamSet& params, const EncoderRef& enc, Rng& rng) {
  init_mlp(params, enc.mlp, rng);
}

NodeId encode(Tape& tape, const SceneSample& scene, const ParamSet& params,
              const EncoderRef& enc) {
  if (scene.history_steps() != enc.history_steps)
    throw ConfigError("scene history length does not match encoder");
  std::vector<double> in;
  in.reserve(scene.history.size() + scene.map_features.size());
  in.insert(in.end(), scene.history.begin(), scene.history.end());
  in.insert(in.end(), scene.map_features.begin(), scene.map_features.end());
  return mlp_apply(tape, tape.input(in), params, enc.mlp);
}

std::vector<double> encode(const SceneSample& scene, const ParamSet& params,
                           const EncoderRef& enc) {
  Tape tape;
  return tape.value_copy(encode(tape, scene, params, enc));
}

}  // namespace flows
