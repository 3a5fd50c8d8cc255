#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "flows/param.hpp"
#include "flows/rng.hpp"

namespace flows {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction, one slot per ParamArray of the bound set.
class AdamState {
 public:
  AdamState(const ParamSet& params, const AdamConfig& cfg);
  const AdamConfig& config(std::size_t i) const { return cfg_[i]; }
  std::int64_t step_count(std::size_t i) const { return steps_[i]; }
  friend void adam_step(ParamSet& params, const GradientRecord& grads, AdamState& state);

 private:
  std::vector<std::vector<double>> m_, v_;
  std::vector<std::int64_t> steps_;
  std::vector<AdamConfig> cfg_;
};

// Standard update; throws NumericalError naming the parameter when a gradient
// entry is non-finite.
void adam_step(ParamSet& params, const GradientRecord& grads, AdamState& state);

// Exponential-moving-average shadow copy of a ParamSet.
struct EmaState {
  ParamSet shadow;
  double decay = 0.999;

  EmaState(const ParamSet& live, double decay_) : shadow(live), decay(decay_) {}
};

// shadow <- decay * shadow + (1 - decay) * live, elementwise.
void ema_update(const ParamSet& live, EmaState& ema);

// Loss probe used by grad_check: `value` evaluates the loss at the current
// parameter values, `value_and_grad` additionally accumulates gradients.
struct LossProbe {
  std::function<double()> value;
  std::function<double(GradientRecord&)> value_and_grad;
};

// Central-difference gradient check over sampled coordinates. Returns
// max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8). Non-finite
// losses raise NumericalError naming the perturbed parameter.
double grad_check(ParamSet& params, const LossProbe& probe, double eps, int coords_per_array,
                  Rng& rng);

}  // namespace flows
