#pragma once

// Quadratic common-Lyapunov certificates for the CACC/ACC switched pair,
// individual-vehicle stability checks and dwell-time bounds.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "platoon/mat2.hpp"

namespace platoon {

inline constexpr double kDefiniteTol = 1e-9;

struct BiboCheck {
  bool hurwitz;  // both poles in the open left half plane
  bool real_poles;  // k_vel <= -2 sqrt(-k_pos): additionally forces real poles
};

/// Individual-vehicle stability of the companion matrix [[0,1],[k_pos,k_vel]].
inline BiboCheck check_real_pole_condition(double k_pos, double k_vel) {
  const bool hurwitz = k_pos < 0.0 && k_vel < 0.0;
  const bool real_poles = k_pos < 0.0 && k_vel <= -2.0 * std::sqrt(-k_pos);
  return {hurwitz, real_poles};
}

// Symmetric P = [[p11, p12], [p12, p22]] for V(z) = z^T P z.
struct LyapunovCandidate {
  double p11{1.0};
  double p12{0.0};
  double p22{1.0};

  Mat2 matrix() const { return {p11, p12, p12, p22}; }
  bool positive_definite() const { return p11 > 0.0 && p11 * p22 - p12 * p12 > 0.0; }
  LyapunovCandidate scaled(double s) const { return {s * p11, s * p12, s * p22}; }
};

/// A^T P + P A. For A = [[0,1],[k,m]] this is
/// [[2k p12, k p22 + p11 + m p12], [., 2(p12 + m p22)]].
inline Mat2 lmi_residual(const Mat2& a, const Mat2& p) {
  Mat2 s = a.transposed() * p + p * a;
  // Exact symmetry: the two off-diagonal products can round differently.
  const double off = 0.5 * (s.m01 + s.m10);
  s.m01 = s.m10 = off;
  return s;
}

struct CertificateReport {
  bool p_positive_definite{false};
  double p_min_eigenvalue{0.0};
  std::vector<double> residual_max_eigenvalues;  // one per A, in input order
  double tol{kDefiniteTol};
  bool pass{false};
};

inline CertificateReport check_common_lyapunov(const LyapunovCandidate& cand,
                                               std::span<const Mat2> systems,
                                               double tol = kDefiniteTol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  CertificateReport r;
  r.tol = tol;
  const Mat2 p = cand.matrix();
  r.p_min_eigenvalue = symmetric_eigenvalues(p).min;
  r.p_positive_definite = r.p_min_eigenvalue > tol;
  bool all_negative = true;
  for (const auto& a : systems) {
    const double top = symmetric_eigenvalues(lmi_residual(a, p)).max;
    r.residual_max_eigenvalues.push_back(top);
    all_negative = all_negative && top < -tol;
  }
  r.pass = r.p_positive_definite && all_negative;
  return r;
}

struct InequalityResult {
  std::string name;
  bool satisfied{false};
  bool ill_posed{false};  // sqrt of a negative number or division by zero
};

struct GuesInequalityReport {
  std::vector<InequalityResult> items;

  bool all_satisfied() const {
    return std::all_of(items.begin(), items.end(), [](const auto& i) { return i.satisfied; });
  }
  const InequalityResult* first_failure() const {
    for (const auto& i : items)
      if (!i.satisfied) return &i;
    return nullptr;
  }
};

namespace detail {

// Bracket (lower, upper) on the velocity gain that makes A^T P + P A negative
// definite for a given position gain k; nullopt if the bracket is ill-posed.
inline std::optional<std::pair<double, double>> velocity_gain_bracket(double k,
                                                                      const LyapunovCandidate& p) {
  if (p.p12 == 0.0) return std::nullopt;
  const double arg = k - k * p.p11 * p.p22 / (p.p12 * p.p12);
  if (arg < 0.0 || !std::isfinite(arg)) return std::nullopt;
  const double root = 2.0 * p.p12 * std::sqrt(arg);
  const double centre = k * p.p22 - p.p11;
  return std::pair{(-root + centre) / p.p12, (root + centre) / p.p12};
}

inline void push_bracket(GuesInequalityReport& r, const char* gain, const char* pos_gain,
                         double k_pos, double k_vel, const LyapunovCandidate& p) {
  const auto b = velocity_gain_bracket(k_pos, p);
  const std::string lo = std::string(gain) + " > lower bound(" + pos_gain + ", P)";
  const std::string hi = std::string(gain) + " < upper bound(" + pos_gain + ", P)";
  if (!b) {
    r.items.push_back({lo, false, true});
    r.items.push_back({hi, false, true});
    return;
  }
  r.items.push_back({lo, k_vel > b->first, false});
  r.items.push_back({hi, k_vel < b->second, false});
}

}  // namespace detail

/// Closed-form scalar conditions on (k1..k4, P) equivalent to P > 0 together
/// with A^T P + P A < 0 for both companion matrices.
inline GuesInequalityReport check_gues_inequalities(double k1, double k2, double k3, double k4,
                                                    const LyapunovCandidate& p) {
  GuesInequalityReport r;
  r.items.push_back({"p11 > 0", p.p11 > 0.0, false});
  r.items.push_back({"p12 > 0", p.p12 > 0.0, false});
  if (p.p11 == 0.0)
    r.items.push_back({"p22 > p12^2 / p11", false, true});
  else
    r.items.push_back({"p22 > p12^2 / p11", p.p22 > p.p12 * p.p12 / p.p11, false});
  r.items.push_back({"k1 < 0", k1 < 0.0, false});
  r.items.push_back({"k3 < 0", k3 < 0.0, false});
  detail::push_bracket(r, "k2", "k1", k1, k2, p);
  detail::push_bracket(r, "k4", "k3", k3, k4, p);
  return r;
}

struct SearchBudget {
  int grid = 41;        // samples per axis
  int refinements = 10;
  double p12_max = 4.0;
  double log_gap_min = -4.0;  // p22 - p12^2 spans 10^min .. 10^max
  double log_gap_max = 3.0;
  double tol = kDefiniteTol;
};

/// Grid search for a common quadratic Lyapunov function with p11 = 1.
/// Scans p12 > 0 and p22 = p12^2 + 10^g, zooming around the best cell. A miss
/// is not a proof that none exists.
inline std::optional<LyapunovCandidate> find_common_lyapunov(std::span<const Mat2> systems,
                                                             const SearchBudget& budget = {}) {
  const auto score = [&](const LyapunovCandidate& c) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& a : systems)
      worst = std::max(worst, symmetric_eigenvalues(lmi_residual(a, c.matrix())).max);
    return worst;
  };
  const auto make = [](double p12, double log_gap) {
    return LyapunovCandidate{1.0, p12, p12 * p12 + std::pow(10.0, log_gap)};
  };

  double lo12 = 0.0, hi12 = budget.p12_max;
  double log_lo = budget.log_gap_min, log_hi = budget.log_gap_max;
  std::optional<LyapunovCandidate> best;
  double best_score = std::numeric_limits<double>::infinity();
  double best12 = 0.0, best_log = 0.0;
  const int n = std::max(budget.grid, 3);

  for (int round = 0; round <= budget.refinements; ++round) {
    for (int a = 0; a < n; ++a) {
      const double p12 = lo12 + (hi12 - lo12) * (a + 1) / n;  // p12 > 0 strictly
      for (int b = 0; b < n; ++b) {
        const double lg = log_lo + (log_hi - log_lo) * b / (n - 1);
        const auto c = make(p12, lg);
        const double s = score(c);
        if (s < best_score) {
          best_score = s;
          best = c;
          best12 = p12;
          best_log = lg;
        }
      }
    }
    if (best && check_common_lyapunov(*best, systems, budget.tol).pass) return best;
    if (!best) return std::nullopt;
    const double w12 = (hi12 - lo12) / 4.0, wlg = (log_hi - log_lo) / 4.0;
    lo12 = std::max(0.0, best12 - w12);
    hi12 = best12 + w12;
    log_lo = best_log - wlg;
    log_hi = best_log + wlg;
  }
  return std::nullopt;
}

struct LyapunovConstants {
  double a;       // lambda_min(P)
  double b;       // lambda_max(P)
  double c;       // lambda_min(-(A^T P + P A))
  double lambda;  // c / (2b), 1/s
};

/// Constants of a V(z) <= b|z|^2 sandwich and the decay bound dV/dt <= -c|z|^2.
inline LyapunovConstants lyapunov_constants(const LyapunovCandidate& cand, const Mat2& a) {
  const auto pe = symmetric_eigenvalues(cand.matrix());
  if (!(pe.min > 0.0)) throw std::domain_error("P is not positive definite");
  const auto se = symmetric_eigenvalues(lmi_residual(a, cand.matrix()));
  if (!(se.max < 0.0)) throw std::domain_error("A^T P + P A is not negative definite for A");
  const double c = -se.max;
  return {pe.min, pe.max, c, c / (2.0 * pe.max)};
}

struct DwellBounds {
  double tau_simplified;  // (1/lambda) log|z(t_n)|
  double tau_tight;       // (1/2 lambda) log(a|z_n|^2 / (b(|z_{n+1}|^2 + |z_n|^2)))

  // Active constraint: the larger bound, never negative.
  double required() const { return std::max({0.0, tau_simplified, tau_tight}); }
};

/// Minimum CACC dwell after a switch at state norm |z(t_n)|.
inline DwellBounds min_dwell_time(double z_norm, double z_next_norm, const LyapunovConstants& k) {
  const double zn2 = z_norm * z_norm;
  const double simplified = z_norm > 0.0 ? std::log(z_norm) / k.lambda
                                         : -std::numeric_limits<double>::infinity();
  const double denom = k.b * (z_next_norm * z_next_norm + zn2);
  const double tight = (zn2 > 0.0 && denom > 0.0)
                           ? std::log(k.a * zn2 / denom) / (2.0 * k.lambda)
                           : -std::numeric_limits<double>::infinity();
  return {simplified, tight};
}

}  // namespace platoon
