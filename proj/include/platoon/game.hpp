#pragma once

// Attacker/defender game with a detector chance node. The defender only sees
// the detector report, so it has two information sets (r, nr); the tree is
// reduced to a 2x4 bimatrix and solved exactly.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "platoon/rng.hpp"
#include "platoon/threat.hpp"

namespace platoon {

inline constexpr double kGapTol = 1e-9;

struct LeafUtility {
  double attacker{0.0};
  double defender{0.0};
};

// Leaf order: (a,r,d) (a,r,nd) (a,nr,d) (a,nr,nd) (na,r,d) (na,r,nd) (na,nr,d) (na,nr,nd).
inline constexpr std::array<const char*, 8> kLeafNames{"a,r,d",   "a,r,nd",   "a,nr,d",   "a,nr,nd",
                                                       "na,r,d",  "na,r,nd",  "na,nr,d",  "na,nr,nd"};

inline constexpr std::size_t leaf_index(bool attack, bool reported, bool downgrade) {
  return (attack ? 0u : 4u) + (reported ? 0u : 2u) + (downgrade ? 0u : 1u);
}

struct GameSpec {
  std::array<LeafUtility, 8> leaves{};
  DetectorModel detector{};

  const LeafUtility& leaf(bool attack, bool reported, bool downgrade) const {
    return leaves[leaf_index(attack, reported, downgrade)];
  }

  void validate() const {
    for (std::size_t k = 0; k < leaves.size(); ++k)
      if (!std::isfinite(leaves[k].attacker) || !std::isfinite(leaves[k].defender))
        throw std::invalid_argument(std::string("utility at leaf (") + kLeafNames[k] + ") is not finite");
    detector.validate();
  }
};

// Chosen so the unique equilibrium mixes heavily toward attacking and the
// defender downgrades rarely after a clean report. With the (0.7, 0.1)
// detector: P(attack) = 39/47, P(d|r) = 1, P(d|nr) = 3/23.
inline GameSpec default_game_spec() {
  GameSpec g;
  const LeafUtility caught{-6.0, 0.0}, missed{17.0, -8.0}, false_alarm{0.0, -13.0}, quiet{0.0, 0.0};
  g.leaves = {caught, missed, caught, missed, false_alarm, quiet, false_alarm, quiet};
  return g;
}

struct BehavioralStrategy {
  double attacker_p_attack{0.0};
  double defender_p_downgrade_given_r{0.0};
  double defender_p_downgrade_given_nr{0.0};

  double p_downgrade(Report r) const {
    return r == Report::Reported ? defender_p_downgrade_given_r : defender_p_downgrade_given_nr;
  }

  void validate() const {
    for (double p : {attacker_p_attack, defender_p_downgrade_given_r, defender_p_downgrade_given_nr})
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("behavioral probabilities must lie in [0, 1]");
  }
};

struct UtilityPair {
  double attacker{0.0};
  double defender{0.0};
};

inline UtilityPair expected_utilities(const GameSpec& spec, const BehavioralStrategy& s) {
  UtilityPair u;
  for (bool a : {true, false}) {
    const double pa = a ? s.attacker_p_attack : 1.0 - s.attacker_p_attack;
    const double pr_report = a ? spec.detector.p_report_given_attack : spec.detector.p_report_given_benign;
    for (bool r : {true, false}) {
      const double pr = r ? pr_report : 1.0 - pr_report;
      const double pd_d = r ? s.defender_p_downgrade_given_r : s.defender_p_downgrade_given_nr;
      for (bool d : {true, false}) {
        const double w = pa * pr * (d ? pd_d : 1.0 - pd_d);
        const auto& leaf = spec.leaf(a, r, d);
        u.attacker += w * leaf.attacker;
        u.defender += w * leaf.defender;
      }
    }
  }
  return u;
}

// Two-row bimatrix; row 0 = attack, row 1 = no attack.
struct Bimatrix {
  int cols{0};
  std::vector<double> row_payoff;  // 2 x cols, row-major
  std::vector<double> col_payoff;

  Bimatrix() = default;
  explicit Bimatrix(int m) : cols(m), row_payoff(2 * static_cast<std::size_t>(m)), col_payoff(row_payoff) {}

  double& a(int r, int c) { return row_payoff[static_cast<std::size_t>(r * cols + c)]; }
  double& b(int r, int c) { return col_payoff[static_cast<std::size_t>(r * cols + c)]; }
  double a(int r, int c) const { return row_payoff[static_cast<std::size_t>(r * cols + c)]; }
  double b(int r, int c) const { return col_payoff[static_cast<std::size_t>(r * cols + c)]; }
};

// Defender pure strategies, in column order: (d|r,d|nr) (d|r,nd|nr) (nd|r,d|nr) (nd|r,nd|nr).
inline constexpr std::array<const char*, 4> kDefenderPureNames{"d|r,d|nr", "d|r,nd|nr", "nd|r,d|nr",
                                                               "nd|r,nd|nr"};

inline constexpr bool column_downgrades(int col, Report r) {
  return r == Report::Reported ? col < 2 : col % 2 == 0;
}

struct NormalForm {
  Bimatrix payoffs{4};
};

inline NormalForm to_normal_form(const GameSpec& spec) {
  NormalForm nf;
  for (int row = 0; row < 2; ++row)
    for (int col = 0; col < 4; ++col) {
      const BehavioralStrategy pure{row == 0 ? 1.0 : 0.0,
                                    column_downgrades(col, Report::Reported) ? 1.0 : 0.0,
                                    column_downgrades(col, Report::NotReported) ? 1.0 : 0.0};
      const auto u = expected_utilities(spec, pure);
      nf.payoffs.a(row, col) = u.attacker;
      nf.payoffs.b(row, col) = u.defender;
    }
  return nf;
}

struct MixedProfile {
  double p_row0{0.0};        // probability of the first row (attack)
  std::vector<double> cols;  // weights over columns
};

struct Equilibrium {
  MixedProfile profile;
  double row_value{0.0};
  double col_value{0.0};
  double row_gap{0.0};
  double col_gap{0.0};
};

struct NashResult {
  std::vector<Equilibrium> equilibria;
  // Some strategy with support size k has more than k pure best responses.
  // Equilibria may then form continua; the list holds representative points.
  bool degenerate{false};
};

namespace detail {

inline std::vector<double> column_values(const Bimatrix& g, double p) {
  std::vector<double> v(static_cast<std::size_t>(g.cols));
  for (int c = 0; c < g.cols; ++c) v[static_cast<std::size_t>(c)] = p * g.b(0, c) + (1.0 - p) * g.b(1, c);
  return v;
}

inline std::array<double, 2> row_values(const Bimatrix& g, const std::vector<double>& q) {
  std::array<double, 2> v{0.0, 0.0};
  for (int c = 0; c < g.cols; ++c) {
    v[0] += q[static_cast<std::size_t>(c)] * g.a(0, c);
    v[1] += q[static_cast<std::size_t>(c)] * g.a(1, c);
  }
  return v;
}

inline int count_near_max(std::span<const double> v, double tol) {
  const double m = *std::max_element(v.begin(), v.end());
  return static_cast<int>(std::count_if(v.begin(), v.end(), [&](double x) { return x >= m - tol; }));
}

inline bool same_profile(const MixedProfile& x, const MixedProfile& y, double tol) {
  if (std::abs(x.p_row0 - y.p_row0) > tol) return false;
  for (std::size_t c = 0; c < x.cols.size(); ++c)
    if (std::abs(x.cols[c] - y.cols[c]) > tol) return false;
  return true;
}

}  // namespace detail

/// Largest gain from a unilateral pure deviation, per player.
inline std::pair<double, double> best_response_gap(const Bimatrix& g, const MixedProfile& s) {
  const auto rv = detail::row_values(g, s.cols);
  const double row_now = s.p_row0 * rv[0] + (1.0 - s.p_row0) * rv[1];
  const auto cv = detail::column_values(g, s.p_row0);
  double col_now = 0.0;
  for (std::size_t c = 0; c < cv.size(); ++c) col_now += s.cols[c] * cv[c];
  const double row_best = std::max(rv[0], rv[1]);
  const double col_best = *std::max_element(cv.begin(), cv.end());
  return {std::max(0.0, row_best - row_now), std::max(0.0, col_best - col_now)};
}

/// Every Nash equilibrium of a 2 x M bimatrix (M <= 8) by support enumeration.
///
/// Candidate row strategies are the two pure rows and each p that makes the
/// column player indifferent between a column pair; candidate column
/// strategies are the pure columns and each two-column mix that makes the row
/// player indifferent. Every pair is kept if both gaps are within tol.
inline NashResult solve_nash(const Bimatrix& g, double tol = kGapTol) {
  if (g.cols < 1 || g.cols > 8) throw std::invalid_argument("solve_nash supports 2 x M games with 1 <= M <= 8");
  const auto m = static_cast<std::size_t>(g.cols);
  NashResult out;

  std::vector<double> row_cands{1.0, 0.0};
  std::vector<std::vector<double>> col_cands;
  for (std::size_t c = 0; c < m; ++c) {
    std::vector<double> q(m, 0.0);
    q[c] = 1.0;
    col_cands.push_back(std::move(q));
  }
  for (int j = 0; j < g.cols; ++j)
    for (int k = j + 1; k < g.cols; ++k) {
      // Column player indifferent between j and k.
      const double db0 = g.b(0, j) - g.b(0, k), db1 = g.b(1, j) - g.b(1, k);
      if (db0 != db1) {
        const double p = db1 / (db1 - db0);
        if (p > 0.0 && p < 1.0) row_cands.push_back(p);
      }
      // Row player indifferent when mixing j and k.
      const double dj = g.a(0, j) - g.a(1, j), dk = g.a(0, k) - g.a(1, k);
      if (dj != dk) {
        const double w = dk / (dk - dj);  // weight on j
        if (w > 0.0 && w < 1.0) {
          std::vector<double> q(m, 0.0);
          q[static_cast<std::size_t>(j)] = w;
          q[static_cast<std::size_t>(k)] = 1.0 - w;
          col_cands.push_back(std::move(q));
        }
      }
    }

  for (double p : row_cands) {
    const auto cv = detail::column_values(g, p);
    const int support = (p == 0.0 || p == 1.0) ? 1 : 2;
    if (detail::count_near_max(cv, tol) > support) out.degenerate = true;
  }
  for (const auto& q : col_cands) {
    const auto rv = detail::row_values(g, q);
    const int support = static_cast<int>(std::count_if(q.begin(), q.end(), [](double w) { return w > 0.0; }));
    if (detail::count_near_max(rv, tol) > support) out.degenerate = true;
  }

  for (double p : row_cands)
    for (const auto& q : col_cands) {
      MixedProfile s{p, q};
      const auto [ga, gd] = best_response_gap(g, s);
      if (ga > tol || gd > tol) continue;
      const bool dup = std::any_of(out.equilibria.begin(), out.equilibria.end(),
                                   [&](const Equilibrium& e) { return detail::same_profile(e.profile, s, tol); });
      if (dup) continue;
      const auto rv = detail::row_values(g, q);
      const auto cv = detail::column_values(g, p);
      double col_value = 0.0;
      for (std::size_t c = 0; c < m; ++c) col_value += q[c] * cv[c];
      out.equilibria.push_back({std::move(s), p * rv[0] + (1.0 - p) * rv[1], col_value, ga, gd});
    }
  return out;
}

/// Kuhn conversion of a mixed defender strategy over the four pure columns.
inline BehavioralStrategy to_behavioral(double p_attack, std::span<const double> defender_weights) {
  if (defender_weights.size() != 4) throw std::invalid_argument("defender mixed strategy needs 4 weights");
  return {p_attack, defender_weights[0] + defender_weights[1], defender_weights[0] + defender_weights[2]};
}

/// Per-player gap computed directly on the tree, independent of the normal form.
inline std::pair<double, double> best_response_gap(const GameSpec& spec, const BehavioralStrategy& s) {
  const auto now = expected_utilities(spec, s);
  double best_a = -std::numeric_limits<double>::infinity();
  for (double pa : {0.0, 1.0}) {
    auto dev = s;
    dev.attacker_p_attack = pa;
    best_a = std::max(best_a, expected_utilities(spec, dev).attacker);
  }
  double best_d = -std::numeric_limits<double>::infinity();
  for (double dr : {0.0, 1.0})
    for (double dnr : {0.0, 1.0}) {
      auto dev = s;
      dev.defender_p_downgrade_given_r = dr;
      dev.defender_p_downgrade_given_nr = dnr;
      best_d = std::max(best_d, expected_utilities(spec, dev).defender);
    }
  return {std::max(0.0, best_a - now.attacker), std::max(0.0, best_d - now.defender)};
}

enum class EquilibriumSelection {
  DefenderBest,  // highest defender value; ties keep solver order
  First,
};

struct GameSolution {
  NormalForm normal_form;
  NashResult nash;
  std::size_t selected{0};
  BehavioralStrategy strategy;
};

inline GameSolution solve_security_game(const GameSpec& spec,
                                        EquilibriumSelection sel = EquilibriumSelection::DefenderBest) {
  spec.validate();
  GameSolution sol;
  sol.normal_form = to_normal_form(spec);
  sol.nash = solve_nash(sol.normal_form.payoffs);
  if (sol.nash.equilibria.empty()) throw std::runtime_error("no equilibrium found");
  if (sel == EquilibriumSelection::DefenderBest) {
    for (std::size_t k = 1; k < sol.nash.equilibria.size(); ++k)
      if (sol.nash.equilibria[k].col_value > sol.nash.equilibria[sol.selected].col_value + kGapTol)
        sol.selected = k;
  }
  const auto& e = sol.nash.equilibria[sol.selected];
  sol.strategy = to_behavioral(e.profile.p_row0, e.profile.cols);
  return sol;
}

/// One play of the tree. Consumes exactly three draws.
inline UtilityPair sample_play(const GameSpec& spec, const BehavioralStrategy& s, Rng& rng) {
  const bool attack = rng.bernoulli(s.attacker_p_attack);
  const auto report = detector_sample(attack, spec.detector, rng);
  const bool downgrade = rng.bernoulli(s.p_downgrade(report.value));
  const auto& leaf = spec.leaf(attack, report.value == Report::Reported, downgrade);
  return {leaf.attacker, leaf.defender};
}

}  // namespace platoon
