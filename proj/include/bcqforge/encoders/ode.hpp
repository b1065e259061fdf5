#pragma once

#include <cstddef>

#include "bcqforge/error.hpp"

namespace bcqforge::encoders {

/// Classic fourth-order Runge–Kutta step for h' = f(h). State only needs +, and scalar *, so
/// the same code runs on plain tensors and on taped variables.
template <class State, class Field>
State rk4_step(const Field& f, const State& h, double dt) {
  const State k1 = f(h);
  const State k2 = f(h + (0.5 * dt) * k1);
  const State k3 = f(h + (0.5 * dt) * k2);
  const State k4 = f(h + dt * k3);
  return h + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Integrates over an interval of length `span` with `steps` equal RK4 steps.
template <class State, class Field>
State rk4_integrate(const Field& f, State h, double span, std::size_t steps) {
  if (steps == 0) throw ConfigError("rk4: step count must be >= 1");
  const double dt = span / static_cast<double>(steps);
  for (std::size_t i = 0; i < steps; ++i) h = rk4_step(f, h, dt);
  return h;
}

}  // namespace bcqforge::encoders
