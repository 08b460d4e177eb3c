#include "gmswave/propagate.hpp"

#include <cmath>

namespace gmswave {

TimeGrid TimeGrid::from_step(Real T, Real dt) {
  if (!(T > 0) || !(dt > 0)) throw ConfigError("time grid needs T > 0 and dt > 0");
  TimeGrid g;
  g.steps = std::llround(T / dt);
  if (g.steps < 1 || std::abs(g.steps * dt - T) > 1e-9 * T)
    throw ConfigError("T is not an integer multiple of dt");
  g.T = T;
  g.dt = dt;
  return g;
}

TimeGrid TimeGrid::fit(Real T, Real dt_max) {
  if (!(T > 0) || !(dt_max > 0)) throw ConfigError("time grid needs T > 0 and dt_max > 0");
  TimeGrid g;
  g.steps = static_cast<std::int64_t>(std::ceil(T / dt_max - 1e-12));
  g.steps = std::max<std::int64_t>(g.steps, 1);
  g.T = T;
  g.dt = T / static_cast<Real>(g.steps);
  return g;
}

Real SourceSpec::time_factor(Real t) const {
  if (kind != SourceKind::ricker) return 0;
  const Real pi = Real(M_PI);
  const Real tau = t - 2.0 / f0;
  const Real q = pi * pi * f0 * f0 * tau * tau;
  return (1.0 - 2.0 * q) * std::exp(-q);
}

Real ricker_eval(Real x, Real y, Real t, const SourceSpec& spec) {
  if (spec.kind != SourceKind::ricker) return 0;
  return spec.spatial(x, y) * spec.time_factor(t);
}

Real beta_paper(Real h, Real a1, Real gamma, Real lambda_trace) {
  if (!(h > 0) || !(a1 > 0)) throw ConfigError("beta(h) needs h > 0 and a1 > 0");
  return h * h / (a1 * (24.0 + 32.0 * std::sqrt(3.0 * lambda_trace) + 16.0 * gamma));
}

}  // namespace gmswave
