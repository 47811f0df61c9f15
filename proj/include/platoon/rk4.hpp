#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace platoon {

struct NonFiniteState : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Anything indexable with a size(): std::vector<double>, std::array<double, N>.
template <typename S>
concept OdeState = std::copyable<S> && requires(S s, const S cs, std::size_t k) {
  { cs.size() } -> std::convertible_to<std::size_t>;
  { s[k] } -> std::convertible_to<double&>;
};

/// Classical fourth-order Runge-Kutta step of y' = f(t, y).
/// Throws NonFiniteState if the result contains NaN or infinity.
template <OdeState State, typename Fn>
  requires std::invocable<Fn&, double, const State&>
State step_rk4(const State& y, Fn&& f, double t, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("RK4 step must be positive");
  const auto n = y.size();
  const auto shifted = [&](const State& k, double scale) {
    State out = y;
    for (std::size_t i = 0; i < n; ++i) out[i] += scale * k[i];
    return out;
  };
  const State k1 = f(t, y);
  const State k2 = f(t + 0.5 * h, shifted(k1, 0.5 * h));
  const State k3 = f(t + 0.5 * h, shifted(k2, 0.5 * h));
  const State k4 = f(t + h, shifted(k3, h));
  State out = y;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!std::isfinite(out[i]))
      throw NonFiniteState("non-finite state component " + std::to_string(i) + " at t = " +
                           std::to_string(t + h));
  }
  return out;
}

}  // namespace platoon
