#include "flows/optim.hpp"

#include <algorithm>
#include <cmath>

#include "flows/errors.hpp"

namespace flows {

AdamState::AdamState(const ParamSet& params, const AdamConfig& cfg) {
  m_.resize(params.count());
  v_.resize(params.count());
  steps_.assign(params.count(), 0);
  cfg_.assign(params.count(), cfg);
  for (std::size_t i = 0; i < params.count(); ++i) {
    m_[i].assign(params.at(i).size(), 0.0);
    v_[i].assign(params.at(i).size(), 0.0);
  }
}

void adam_step(ParamSet& params, const GradientRecord& grads, AdamState& state) {
  for (std::size_t i = 0; i < params.count(); ++i) {
    ParamArray& p = params.at(i);
    const std::vector<double>& g = grads.slot(i);
    const AdamConfig& c = state.cfg_[i];
    for (double gv : g)
      if (!std::isfinite(gv))
        throw NumericalError("non-finite gradient for param '" + p.name + "'");
    const std::int64_t t = ++state.steps_[i];
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
    std::vector<double>& m = state.m_[i];
    std::vector<double>& v = state.v_[i];
    for (std::size_t j = 0; j < p.values.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mh = m[j] / bc1;
      const double vh = v[j] / bc2;
      p.values[j] -= c.lr * mh / (std::sqrt(vh) + c.eps);
    }
  }
}

void ema_update(const ParamSet& live, EmaState& ema) {
  if (ema.decay <= 0.0 || ema.decay >= 1.0)
    throw ConfigError("ema decay must be in (0,1), got " + std::to_string(ema.decay));
  for (std::size_t i = 0; i < live.count(); ++i) {
    const ParamArray& src = live.at(i);
    ParamArray& dst = ema.shadow.at(i);
    if (dst.values.size() != src.values.size())
      throw ConfigError("ema shadow shape mismatch for '" + src.name + "'");
    for (std::size_t j = 0; j < src.values.size(); ++j)
      dst.values[j] = ema.decay * dst.values[j] + (1.0 - ema.decay) * src.values[j];
  }
}

double grad_check(ParamSet& params, const LossProbe& probe, double eps, int coords_per_array,
                  Rng& rng) {
  GradientRecord analytic(params);
  const double base = probe.value_and_grad(analytic);
  if (!std::isfinite(base)) throw NumericalError("grad_check: loss non-finite at base point");

  double worst = 0.0;
  for (std::size_t i = 0; i < params.count(); ++i) {
    ParamArray& p = params.at(i);
    const std::size_t n = p.size();
    std::vector<std::size_t> coords;
    if (static_cast<int>(n) <= coords_per_array) {
      coords.resize(n);
      for (std::size_t j = 0; j < n; ++j) coords[j] = j;
    } else {
      for (int j = 0; j < coords_per_array; ++j)
        coords.push_back(static_cast<std::size_t>(rng.uniform_int(static_cast<int>(n))));
    }
    for (std::size_t j : coords) {
      const double saved = p.values[j];
      p.values[j] = saved + eps;
      const double up = probe.value();
      p.values[j] = saved - eps;
      const double dn = probe.value();
      p.values[j] = saved;
      if (!std::isfinite(up) || !std::isfinite(dn))
        throw NumericalError("grad_check: loss non-finite when perturbing '" + p.name + "'");
      const double numeric = (up - dn) / (2.0 * eps);
      const double a = analytic.slot(i)[j];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace flows
