#pragma once

// Spacing-error transfer functions and the two frequency/time-domain string
// stability tests: ||H||_inf <= 1 and a nonnegative impulse response.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "platoon/controllers.hpp"
#include "platoon/rk4.hpp"

namespace platoon {

// Rational function in s. Coefficients are in ascending powers:
// {c0, c1, c2} means c0 + c1 s + c2 s^2.
struct TransferFunction {
  std::vector<double> numerator;
  std::vector<double> denominator;

  static int degree(const std::vector<double>& p) {
    for (int k = static_cast<int>(p.size()) - 1; k >= 0; --k)
      if (p[static_cast<std::size_t>(k)] != 0.0) return k;
    return -1;  // zero polynomial
  }

  bool proper() const { return degree(numerator) <= degree(denominator); }
  bool is_zero() const { return degree(numerator) < 0; }

  std::complex<double> operator()(std::complex<double> s) const {
    return eval(numerator, s) / eval(denominator, s);
  }

  static std::complex<double> eval(const std::vector<double>& p, std::complex<double> s) {
    std::complex<double> acc{0.0, 0.0};
    for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * s + *it;
    return acc;
  }

  void validate() const {
    if (degree(denominator) < 0) throw std::invalid_argument("denominator is identically zero");
    if (!proper()) throw std::invalid_argument("transfer function is improper");
  }
};

/// Routh-Hurwitz test: every root of p in the open left half plane.
inline bool is_hurwitz_polynomial(const std::vector<double>& p) {
  const int n = TransferFunction::degree(p);
  if (n < 0) return false;
  const auto width = static_cast<std::size_t>(n / 2 + 1);
  const double lead = p[static_cast<std::size_t>(n)];
  // Rows of the Routh array, seeded with descending coefficients / lead.
  std::vector<std::vector<double>> rows(2, std::vector<double>(width, 0.0));
  for (int k = 0; k <= n; ++k)
    rows[static_cast<std::size_t>(k % 2)][static_cast<std::size_t>(k / 2)] =
        p[static_cast<std::size_t>(n - k)] / lead;
  while (rows.size() < static_cast<std::size_t>(n) + 1) {
    const auto& a = rows[rows.size() - 2];
    const auto& b = rows[rows.size() - 1];
    if (!(b[0] > 0.0)) return false;
    std::vector<double> next(width, 0.0);
    for (std::size_t k = 0; k + 1 < width; ++k) next[k] = (b[0] * a[k + 1] - a[0] * b[k + 1]) / b[0];
    rows.push_back(std::move(next));
  }
  for (std::size_t r = 0; r <= static_cast<std::size_t>(n); ++r)
    if (!(rows[r][0] > 0.0)) return false;
  return true;
}

inline bool is_stable(const TransferFunction& h) { return is_hurwitz_polynomial(h.denominator); }

/// eps_i / eps_{i-1} for a homogeneous string of predecessor-following vehicles.
///
/// From eps_i'' = u_i - u_{i-1} with u_i = alpha eps_i + beta eps_i' + gamma x_{i-1}'':
///   H(s) = (gamma s^2 - beta s - alpha) / (s^2 - beta s - alpha),
/// with gamma = 0 for ACC. CACC with nonzero leader gains couples every
/// vehicle to the leader and has no single-ratio form; that case throws.
inline TransferFunction spacing_error_tf(ControlMode mode, const GainSet& g) {
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
  if (mode == ControlMode::Acc) {
    alpha = g.acc.alpha;
    beta = g.acc.beta;
  } else {
    const auto& c = g.cacc;
    if (c.alpha_lead != 0.0 || c.beta_lead != 0.0 || c.gamma_lead != 0.0)
      throw std::invalid_argument(
          "unsupported topology: predecessor-leader CACC has no single spacing-error ratio");
    alpha = c.alpha_pred;
    beta = c.beta_pred;
    gamma = c.gamma_pred;
  }
  return {{-alpha, -beta, gamma}, {-alpha, -beta, 1.0}};
}

struct HinfResult {
  double value;
  double omega;  // rad/s where the peak was found
};

/// sup |H(jw)| over w in [0, omega_max]: log-spaced grid plus golden-section
/// refinement between the neighbours of the best grid point.
inline HinfResult hinf_norm(const TransferFunction& h, double omega_max = 1e3,
                            int grid_points = 2000) {
  h.validate();
  if (!is_stable(h)) throw std::domain_error("H(s) is not stable; H-infinity norm undefined");
  if (!(omega_max > 0.0) || grid_points < 3)
    throw std::invalid_argument("hinf_norm needs omega_max > 0 and at least 3 grid points");
  const auto mag = [&](double w) { return std::abs(h(std::complex<double>{0.0, w})); };

  std::vector<double> grid{0.0};
  const double w_min = omega_max * 1e-6;
  for (int k = 0; k < grid_points; ++k)
    grid.push_back(w_min * std::pow(omega_max / w_min, static_cast<double>(k) / (grid_points - 1)));

  std::size_t best = 0;
  double best_val = mag(grid[0]);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double v = mag(grid[k]);
    if (v > best_val) {
      best_val = v;
      best = k;
    }
  }
  double lo = grid[best == 0 ? 0 : best - 1];
  double hi = grid[std::min(best + 1, grid.size() - 1)];
  const double inv_phi = 1.0 / std::numbers::phi;
  double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
  double f1 = mag(x1), f2 = mag(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = mag(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = mag(x1);
    }
  }
  const double w_ref = 0.5 * (lo + hi);
  const double v_ref = mag(w_ref);
  if (v_ref > best_val) return {v_ref, w_ref};
  return {best_val, grid[best]};
}

/// Samples h(t) on (0, horizon] by integrating the controllable canonical
/// realisation from x(0) = B. The direct-feedthrough impulse at t = 0 is not
/// sampled. H = 0 counts as nonnegative.
inline bool impulse_response_nonneg(const TransferFunction& h, double horizon = 60.0,
                                    double step = 1e-3, double tol = 1e-9) {
  h.validate();
  if (h.is_zero()) return true;
  if (!is_stable(h)) throw std::domain_error("impulse response of an unstable H is unbounded");

  const int n = TransferFunction::degree(h.denominator);
  const double lead = h.denominator[static_cast<std::size_t>(n)];
  std::vector<double> den(static_cast<std::size_t>(n) + 1, 0.0), num(static_cast<std::size_t>(n) + 1, 0.0);
  for (int k = 0; k <= n; ++k) den[static_cast<std::size_t>(k)] = h.denominator[static_cast<std::size_t>(k)] / lead;
  for (std::size_t k = 0; k < h.numerator.size() && k <= static_cast<std::size_t>(n); ++k)
    num[k] = h.numerator[k] / lead;
  const double feedthrough = num[static_cast<std::size_t>(n)];
  for (int k = 0; k < n; ++k) num[static_cast<std::size_t>(k)] -= feedthrough * den[static_cast<std::size_t>(k)];

  if (n == 0) return true;  // pure gain: no response for t > 0
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  x.back() = 1.0;  // B = e_n
  const auto f = [&](double, const std::vector<double>& s) {
    std::vector<double> d(s.size());
    for (std::size_t k = 0; k + 1 < s.size(); ++k) d[k] = s[k + 1];
    double last = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) last -= den[k] * s[k];
    d.back() = last;
    return d;
  };
  const auto output = [&](const std::vector<double>& s) {
    double y = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) y += num[k] * s[k];
    return y;
  };
  const auto steps = static_cast<long>(std::ceil(horizon / step));
  for (long k = 0; k < steps; ++k) {
    x = step_rk4(x, f, k * step, step);
    if (output(x) < -tol) return false;
  }
  return true;
}

}  // namespace platoon
