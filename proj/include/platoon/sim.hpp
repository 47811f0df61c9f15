#pragma once

// Switched closed-loop platoon simulation: attack injection, detector
// sampling, game-driven CACC/ACC switching, dwell-time hold and the safety
// surface, integrated with fixed-step RK4.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "platoon/controllers.hpp"
#include "platoon/core.hpp"
#include "platoon/game.hpp"
#include "platoon/lyapunov.hpp"
#include "platoon/rk4.hpp"
#include "platoon/rng.hpp"
#include "platoon/threat.hpp"

namespace platoon {

enum class SwitchingPolicy {
  Game,         // per-vehicle sampling from the equilibrium strategy
  Alternating,  // platoon-wide CACC/ACC schedule
  CaccOnly,
  AccOnly,
};

enum class ModeCause { Initial, Game, SafetySurface, DwellHold, Schedule };

inline const char* to_string(SwitchingPolicy p) {
  switch (p) {
    case SwitchingPolicy::Game: return "game";
    case SwitchingPolicy::Alternating: return "alternating";
    case SwitchingPolicy::CaccOnly: return "cacc-only";
    case SwitchingPolicy::AccOnly: return "acc-only";
  }
  return "?";
}

inline const char* to_string(ModeCause c) {
  switch (c) {
    case ModeCause::Initial: return "initial";
    case ModeCause::Game: return "game";
    case ModeCause::SafetySurface: return "safety-surface";
    case ModeCause::DwellHold: return "dwell-hold";
    case ModeCause::Schedule: return "schedule";
  }
  return "?";
}

// Alternating policy: CACC phases last max(min_cacc_phase, dwell bound at the
// largest |z_i|) when dwell is enabled, else min_cacc_phase; ACC phases are
// uniform on [acc_phase_min, acc_phase_max].
struct AlternatingSchedule {
  double min_cacc_phase{1.0};
  double acc_phase_min{2.0};
  double acc_phase_max{20.0};
};

struct SwitchingConfig {
  SwitchingPolicy policy{SwitchingPolicy::Game};
  bool dwell_enabled{true};
  bool safety_enabled{true};
  double release_fraction{0.5};  // safety latch releases at |eps| <= fraction * eps_max
  EquilibriumSelection selection{EquilibriumSelection::DefenderBest};
  AlternatingSchedule alternating{};
};

struct ScenarioConfig {
  PlatoonConfig platoon{};
  std::vector<VehicleState> initial_offsets;  // empty, or one per vehicle on top of equilibrium
  GainSet gains{};
  std::map<int, GainSet> gain_overrides;      // keyed by 1-based follower index
  std::optional<LyapunovCandidate> lyapunov;  // nullopt: search for one
  std::optional<AttackSpec> attack;
  GameSpec game{default_game_spec()};         // game.detector is the detector in the loop
  SwitchingConfig switching{};
  double decision_period{1.0};
  double step{0.01};
  double duration{120.0};
  std::uint64_t seed{0};

  const GainSet& gains_for(int i) const {
    const auto it = gain_overrides.find(i);
    return it == gain_overrides.end() ? gains : it->second;
  }

  bool needs_dwell() const {
    return switching.dwell_enabled && (switching.policy == SwitchingPolicy::Game ||
                                       switching.policy == SwitchingPolicy::Alternating);
  }

  void validate() const {
    platoon.validate();
    const int n = platoon.vehicle_count;
    if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
    if (!(decision_period >= step)) throw std::invalid_argument("decision_period must be at least step");
    if (!(duration > 0.0)) throw std::invalid_argument("duration must be positive");
    if (!initial_offsets.empty() && static_cast<int>(initial_offsets.size()) != n)
      throw std::invalid_argument("initial_offsets needs one entry per vehicle");
    for (const auto& o : initial_offsets)
      if (!o.finite()) throw std::invalid_argument("initial offsets must be finite");
    for (const auto& [i, g] : gain_overrides)
      if (i < 2 || i > n) throw std::invalid_argument("gain override for vehicle " + std::to_string(i) + " out of range");
    for (int i = 2; i <= n; ++i) {
      const auto& g = gains_for(i);
      g.cacc.validate();
      g.acc.validate();
      if (!is_hurwitz(g.a_cacc()) || !is_hurwitz(g.a_acc()))
        throw std::invalid_argument("gains for vehicle " + std::to_string(i) + " are not Hurwitz");
    }
    if (lyapunov && !lyapunov->positive_definite())
      throw std::invalid_argument("Lyapunov matrix must be positive definite");
    if (attack) attack->validate(n);
    game.validate();
    const auto& sw = switching;
    if (!(sw.release_fraction >= 0.0 && sw.release_fraction < 1.0))
      throw std::invalid_argument("release_fraction must lie in [0, 1)");
    const auto& alt = sw.alternating;
    if (!(alt.min_cacc_phase > 0.0) || !(alt.acc_phase_min > 0.0) || !(alt.acc_phase_max >= alt.acc_phase_min))
      throw std::invalid_argument("alternating schedule needs positive phases with acc_phase_max >= acc_phase_min");
  }
};

struct SwitchState {
  ControlMode mode{ControlMode::Cacc};
  double entry_time{0.0};
  double required_dwell{0.0};
  bool safety_latched{false};
};

struct Decision {
  ControlMode mode;
  ModeCause cause;
};

/// Latches on |eps| >= eps_max and releases at |eps| <= release * eps_max.
inline bool update_safety_latch(SwitchState& s, double spacing_error, double eps_max, double release) {
  const double e = std::abs(spacing_error);
  if (e >= eps_max)
    s.safety_latched = true;
  else if (s.safety_latched && e <= release * eps_max)
    s.safety_latched = false;
  return s.safety_latched;
}

/// One defender decision for a follower. Priority: safety surface, dwell
/// hold, then a draw from the behavioral strategy given the latest report.
/// Always consumes exactly one draw so streams stay aligned across policies.
inline Decision switching_decision(double spacing_error, Report report, const BehavioralStrategy& strategy,
                                   SwitchState& state, double t, const SwitchingConfig& cfg, double eps_max,
                                   Rng& rng) {
  const double u = rng.uniform();
  if (cfg.safety_enabled && update_safety_latch(state, spacing_error, eps_max, cfg.release_fraction))
    return {ControlMode::Acc, ModeCause::SafetySurface};
  if (cfg.dwell_enabled && state.mode == ControlMode::Cacc && t - state.entry_time < state.required_dwell - 1e-9)
    return {ControlMode::Cacc, ModeCause::DwellHold};
  return {u < strategy.p_downgrade(report) ? ControlMode::Acc : ControlMode::Cacc, ModeCause::Game};
}

struct ModeEvent {
  double time;
  int vehicle;
  ControlMode mode;
  ModeCause cause;
  double required_dwell;  // set on CACC entry, 0 otherwise
};

struct DecisionRecord {
  double time;
  int vehicle;
  Report report;
  ControlMode mode;
  ModeCause cause;
};

struct ReportRecord {
  double time;
  int vehicle;
  Report report;
};

struct Collision {
  double time;
  int vehicle;  // the follower that reached its predecessor
  double gap;
};

// Series are indexed [vehicle - 1][sample]. The leader's spacing error is 0
// and its mode entry is meaningless.
struct SimTrace {
  int vehicle_count{0};
  std::vector<double> time;
  std::vector<std::vector<double>> position, velocity, command, spacing_error, attack;
  std::vector<std::vector<ControlMode>> mode;
  std::vector<ReportRecord> reports;
  std::vector<DecisionRecord> decisions;
  std::vector<ModeEvent> mode_events;
  std::optional<Collision> collision;
  std::optional<BehavioralStrategy> strategy;
  std::optional<LyapunovCandidate> lyapunov;

  std::size_t samples() const { return time.size(); }
};

namespace detail {

struct StepInputs {
  std::vector<ControlMode> modes;         // per vehicle
  double leader_accel{0.0};
  std::vector<double> xi;                 // lumped disturbance per vehicle
  std::vector<FalsificationOffsets> off;  // message offsets per vehicle
};

// Accelerations for every vehicle; fills `commands` with the controller
// output (without lumped disturbance) when non-null.
inline std::vector<double> accelerations(const ScenarioConfig& cfg, const std::vector<double>& y,
                                         const StepInputs& in, std::vector<double>* commands) {
  const int n = cfg.platoon.vehicle_count;
  const double gap = cfg.platoon.desired_gap;
  std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
  if (commands) commands->assign(static_cast<std::size_t>(n), 0.0);
  acc[0] = in.leader_accel;
  if (commands) (*commands)[0] = in.leader_accel;
  const NeighborMessage leader{y[0], y[1], acc[0], 1};
  for (int i = 2; i <= n; ++i) {
    const auto k = static_cast<std::size_t>(i - 1);
    const VehicleState own{y[2 * k], y[2 * k + 1]};
    const VehicleState pred{y[2 * k - 2], y[2 * k - 1]};
    const auto& g = cfg.gains_for(i);
    double u = 0.0;
    if (in.modes[k] == ControlMode::Cacc) {
      NeighborMessage pm{pred.position, pred.velocity, acc[k - 1], i - 1};
      NeighborMessage lm = leader;
      const auto& o = in.off[k];
      pm = {pm.position + o.position, pm.velocity + o.velocity, pm.acceleration + o.acceleration, pm.sender_id};
      lm = {lm.position + o.position, lm.velocity + o.velocity, lm.acceleration + o.acceleration, lm.sender_id};
      u = *cacc_accel(i, own, pm, lm, g.cacc, gap);
    } else {
      u = acc_accel(i, own, {pred.position, pred.velocity}, g.acc, gap);
    }
    if (commands) (*commands)[k] = u;
    acc[k] = u + in.xi[k];
  }
  return acc;
}

inline Vec2 error_state(const std::vector<double>& y, int i, double gap) {
  const auto k = static_cast<std::size_t>(i - 1);
  return {y[2 * k] - y[2 * k - 2] + gap, y[2 * k + 1] - y[2 * k - 1]};
}

}  // namespace detail

/// Resolves the Lyapunov matrix used for dwell bounds: the configured one, or a
/// searched common certificate for every vehicle's (A_CACC, A_ACC) pair.
inline LyapunovCandidate resolve_lyapunov(const ScenarioConfig& cfg) {
  if (cfg.lyapunov) return *cfg.lyapunov;
  std::vector<Mat2> systems;
  for (int i = 2; i <= cfg.platoon.vehicle_count; ++i) {
    systems.push_back(cfg.gains_for(i).a_cacc());
    systems.push_back(cfg.gains_for(i).a_acc());
  }
  const auto found = find_common_lyapunov(systems);
  if (!found) throw std::invalid_argument("no common Lyapunov certificate found for the configured gains; supply P");
  return *found;
}

inline SimTrace run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const int n = cfg.platoon.vehicle_count;
  const auto nz = static_cast<std::size_t>(n);
  const double h = cfg.step, gap = cfg.platoon.desired_gap, eps_max = cfg.platoon.epsilon_max;
  const auto& sw = cfg.switching;
  const auto steps = static_cast<long>(std::llround(cfg.duration / h));
  const long decision_steps = std::max(1L, static_cast<long>(std::llround(cfg.decision_period / h)));
  const long detector_steps =
      std::max(1L, static_cast<long>(std::llround(cfg.game.detector.sampling_period / h)));

  SimTrace tr;
  tr.vehicle_count = n;
  for (auto* s : {&tr.position, &tr.velocity, &tr.command, &tr.spacing_error, &tr.attack}) s->resize(nz);
  tr.mode.resize(nz);

  // Dwell constants, per follower.
  std::vector<std::optional<LyapunovConstants>> dwell(nz);
  if (cfg.needs_dwell()) {
    tr.lyapunov = resolve_lyapunov(cfg);
    for (int i = 2; i <= n; ++i)
      dwell[static_cast<std::size_t>(i - 1)] = lyapunov_constants(*tr.lyapunov, cfg.gains_for(i).a_cacc());
  }
  BehavioralStrategy strategy;
  if (sw.policy == SwitchingPolicy::Game) {
    strategy = solve_security_game(cfg.game, sw.selection).strategy;
    tr.strategy = strategy;
  }

  // Initial state.
  std::vector<double> y(2 * nz);
  for (int i = 1; i <= n; ++i) {
    const auto k = static_cast<std::size_t>(i - 1);
    y[2 * k] = -gap * (i - 1);
    y[2 * k + 1] = cfg.platoon.leader.initial_velocity;
    if (!cfg.initial_offsets.empty()) {
      y[2 * k] += cfg.initial_offsets[k].position;
      y[2 * k + 1] += cfg.initial_offsets[k].velocity;
    }
  }
  for (int i = 2; i <= n; ++i) {
    const auto k = static_cast<std::size_t>(i - 1);
    if (!(y[2 * k - 2] - y[2 * k] > cfg.platoon.vehicle_length))
      throw std::invalid_argument("initial gap of vehicle " + std::to_string(i) + " is at or below vehicle_length");
  }

  Rng schedule_rng(cfg.seed, 1);
  std::vector<Rng> detector_rng, decision_rng;
  for (int i = 1; i <= n; ++i) {
    detector_rng.emplace_back(cfg.seed, 100 + static_cast<std::uint64_t>(i));
    decision_rng.emplace_back(cfg.seed, 200 + static_cast<std::uint64_t>(i));
  }

  const ControlMode initial = sw.policy == SwitchingPolicy::AccOnly ? ControlMode::Acc : ControlMode::Cacc;
  std::vector<SwitchState> st(nz);
  std::vector<Report> latest(nz, Report::NotReported);
  double phase_end = 0.0;  // alternating policy

  const auto z_norm = [&](int i) { return norm(detail::error_state(y, i, gap)); };
  const auto cacc_dwell = [&](int i, double zn) {
    const auto& k = dwell[static_cast<std::size_t>(i - 1)];
    return k ? min_dwell_time(zn, zn, *k).required() : 0.0;
  };
  const auto set_mode = [&](int i, ControlMode m, ModeCause cause, double t, double required) {
    auto& s = st[static_cast<std::size_t>(i - 1)];
    if (s.mode == m && cause != ModeCause::Initial) return;
    s.mode = m;
    s.entry_time = t;
    s.required_dwell = m == ControlMode::Cacc ? required : 0.0;
    tr.mode_events.push_back({t, i, m, cause, s.required_dwell});
  };

  for (int i = 2; i <= n; ++i) set_mode(i, initial, ModeCause::Initial, 0.0, 0.0);
  if (sw.policy == SwitchingPolicy::Alternating) {
    double zmax = 0.0;
    for (int i = 2; i <= n; ++i) zmax = std::max(zmax, z_norm(i));
    const double dur = std::max(sw.alternating.min_cacc_phase, sw.dwell_enabled ? cacc_dwell(2, zmax) : 0.0);
    for (int i = 2; i <= n; ++i) st[static_cast<std::size_t>(i - 1)].required_dwell = dur;
    phase_end = dur;
  } else if (initial == ControlMode::Cacc) {
    for (int i = 2; i <= n; ++i) st[static_cast<std::size_t>(i - 1)].required_dwell = cacc_dwell(i, z_norm(i));
  }
  for (auto& e : tr.mode_events) e.required_dwell = st[static_cast<std::size_t>(e.vehicle - 1)].required_dwell;

  detail::StepInputs in;
  in.modes.assign(nz, ControlMode::Cacc);
  in.xi.assign(nz, 0.0);
  in.off.assign(nz, {});
  std::vector<double> commands;

  for (long step = 0; step <= steps; ++step) {
    const double t = static_cast<double>(step) * h;

    // Collision check on the current sample.
    for (int i = 2; i <= n && !tr.collision; ++i) {
      const auto k = static_cast<std::size_t>(i - 1);
      const double g = y[2 * k - 2] - y[2 * k];
      if (g <= cfg.platoon.vehicle_length) tr.collision = Collision{t, i, g};
    }

    // Detector reports.
    if (sw.policy == SwitchingPolicy::Game && step % detector_steps == 0) {
      for (int i = 2; i <= n; ++i) {
        const auto k = static_cast<std::size_t>(i - 1);
        const bool active = cfg.attack && cfg.attack->targets_vehicle(i) && cfg.attack->active_at(t);
        latest[k] = detector_sample(active, cfg.game.detector, detector_rng[k], t).value;
        tr.reports.push_back({t, i, latest[k]});
      }
    }

    // Mode logic.
    if (sw.policy == SwitchingPolicy::Game && step % decision_steps == 0) {
      for (int i = 2; i <= n; ++i) {
        const auto k = static_cast<std::size_t>(i - 1);
        const double eps = y[2 * k] - y[2 * k - 2] + gap;
        const auto d = switching_decision(eps, latest[k], strategy, st[k], t, sw, eps_max, decision_rng[k]);
        tr.decisions.push_back({t, i, latest[k], d.mode, d.cause});
        set_mode(i, d.mode, d.cause, t, d.mode == ControlMode::Cacc ? cacc_dwell(i, z_norm(i)) : 0.0);
      }
    } else if (sw.policy == SwitchingPolicy::Alternating && t >= phase_end - 1e-9) {
      const bool to_cacc = st[1].mode == ControlMode::Acc;
      double dur = 0.0;
      if (to_cacc) {
        double zmax = 0.0;
        for (int i = 2; i <= n; ++i) zmax = std::max(zmax, z_norm(i));
        dur = std::max(sw.alternating.min_cacc_phase, sw.dwell_enabled ? cacc_dwell(2, zmax) : 0.0);
      } else {
        dur = schedule_rng.uniform(sw.alternating.acc_phase_min, sw.alternating.acc_phase_max);
      }
      for (int i = 2; i <= n; ++i)
        set_mode(i, to_cacc ? ControlMode::Cacc : ControlMode::Acc, ModeCause::Schedule, t, to_cacc ? dur : 0.0);
      phase_end = t + dur;
    }
    if (sw.safety_enabled) {
      for (int i = 2; i <= n; ++i) {
        const auto k = static_cast<std::size_t>(i - 1);
        const double eps = y[2 * k] - y[2 * k - 2] + gap;
        if (update_safety_latch(st[k], eps, eps_max, sw.release_fraction) && st[k].mode == ControlMode::Cacc)
          set_mode(i, ControlMode::Acc, ModeCause::SafetySurface, t, 0.0);
      }
    }

    // Inputs frozen over [t, t + h).
    in.leader_accel = cfg.platoon.leader.acceleration(t);
    for (int i = 2; i <= n; ++i) {
      const auto k = static_cast<std::size_t>(i - 1);
      in.modes[k] = st[k].mode;
      in.xi[k] = 0.0;
      in.off[k] = {};
      if (cfg.attack && cfg.attack->targets_vehicle(i) && in.modes[k] == ControlMode::Cacc) {
        if (cfg.attack->mode == AttackMode::LumpedAcceleration)
          in.xi[k] = attack_signal(*cfg.attack, t);
        else
          in.off[k] = falsification_offsets(*cfg.attack, t);
      }
    }
    detail::accelerations(cfg, y, in, &commands);

    tr.time.push_back(t);
    for (int i = 1; i <= n; ++i) {
      const auto k = static_cast<std::size_t>(i - 1);
      tr.position[k].push_back(y[2 * k]);
      tr.velocity[k].push_back(y[2 * k + 1]);
      tr.command[k].push_back(commands[k]);
      tr.spacing_error[k].push_back(i == 1 ? 0.0 : y[2 * k] - y[2 * k - 2] + gap);
      tr.mode[k].push_back(i == 1 ? ControlMode::Cacc : in.modes[k]);
      double xi = 0.0;
      if (i > 1 && cfg.attack && cfg.attack->targets_vehicle(i) && in.modes[k] == ControlMode::Cacc)
        xi = attack_signal(*cfg.attack, t);
      tr.attack[k].push_back(xi);
    }
    if (tr.collision || step == steps) break;

    const auto f = [&](double, const std::vector<double>& s) {
      const auto a = detail::accelerations(cfg, s, in, nullptr);
      std::vector<double> d(s.size());
      for (std::size_t k = 0; k < nz; ++k) {
        d[2 * k] = s[2 * k + 1];
        d[2 * k + 1] = a[k];
      }
      return d;
    };
    y = step_rk4(y, f, t, h);
  }
  return tr;
}

struct TraceMetrics {
  double min_spacing{std::numeric_limits<double>::infinity()};
  std::vector<double> sup_spacing_error;  // per vehicle; leader entry is 0
  std::vector<double> cacc_occupancy;     // fraction of samples in CACC; leader entry is 0
  bool collision{false};
  bool string_stable{true};
  int first_amplifying_vehicle{0};  // 0 when none
};

/// Extremes over the stored grid and the pairwise sup-norm test for i = 3..N.
inline TraceMetrics trace_metrics(const SimTrace& tr, double tol = 1e-6) {
  if (tr.samples() == 0) throw std::invalid_argument("trace is empty");
  const auto nz = static_cast<std::size_t>(tr.vehicle_count);
  TraceMetrics m;
  m.sup_spacing_error.assign(nz, 0.0);
  m.cacc_occupancy.assign(nz, 0.0);
  m.collision = tr.collision.has_value();
  for (std::size_t k = 1; k < nz; ++k) {
    std::size_t in_cacc = 0;
    for (std::size_t s = 0; s < tr.samples(); ++s) {
      m.min_spacing = std::min(m.min_spacing, tr.position[k - 1][s] - tr.position[k][s]);
      m.sup_spacing_error[k] = std::max(m.sup_spacing_error[k], std::abs(tr.spacing_error[k][s]));
      if (tr.mode[k][s] == ControlMode::Cacc) ++in_cacc;
    }
    m.cacc_occupancy[k] = static_cast<double>(in_cacc) / static_cast<double>(tr.samples());
  }
  for (std::size_t k = 2; k < nz; ++k)
    if (m.sup_spacing_error[k] > m.sup_spacing_error[k - 1] + tol) {
      m.string_stable = false;
      m.first_amplifying_vehicle = static_cast<int>(k + 1);
      break;
    }
  return m;
}

struct LyapunovSample {
  double time;
  double value;
};

/// Aggregate V = sum_i z_i^T P z_i at the samples where followers enter CACC
/// (the first sample counts when it starts in CACC).
inline std::vector<LyapunovSample> lyapunov_at_cacc_entries(const SimTrace& tr, const LyapunovCandidate& p,
                                                            double gap) {
  std::vector<LyapunovSample> out;
  const auto nz = static_cast<std::size_t>(tr.vehicle_count);
  const Mat2 pm = p.matrix();
  for (std::size_t s = 0; s < tr.samples(); ++s) {
    bool entry = false;
    for (std::size_t k = 1; k < nz && !entry; ++k)
      entry = tr.mode[k][s] == ControlMode::Cacc && (s == 0 || tr.mode[k][s - 1] == ControlMode::Acc);
    if (!entry) continue;
    double v = 0.0;
    for (std::size_t k = 1; k < nz; ++k) {
      const Vec2 z{tr.position[k][s] - tr.position[k - 1][s] + gap, tr.velocity[k][s] - tr.velocity[k - 1][s]};
      v += quadratic_form(pm, z);
    }
    out.push_back({tr.time[s], v});
  }
  return out;
}

/// V strictly decreases between successive CACC entries. Pairs starting below
/// `floor` are skipped: at that level the state is round-off.
inline bool lyapunov_decreasing(const std::vector<LyapunovSample>& v, double floor = 1e-12) {
  for (std::size_t k = 0; k + 1 < v.size(); ++k)
    if (v[k].value > floor && !(v[k + 1].value < v[k].value)) return false;
  return true;
}

}  // namespace platoon
