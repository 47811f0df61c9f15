#pragma once

// Message falsification attacks and the imperfect anomaly detector.

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "platoon/core.hpp"
#include "platoon/rng.hpp"

namespace platoon {

struct ConstantSignal {
  double amplitude{2.0};
};
struct RampSignal {
  double slope{0.0};    // m/s^3, measured from window start
  double initial{0.0};  // m/s^2
};
struct SinusoidSignal {
  double amplitude{0.0};
  double angular_frequency{1.0};  // rad/s
  double phase{0.0};              // rad, at window start
};
// Piecewise-linear through (time since window start, value); held flat past the ends.
struct SampleTableSignal {
  std::vector<double> times;
  std::vector<double> values;
};

using AttackSignal = std::variant<ConstantSignal, RampSignal, SinusoidSignal, SampleTableSignal>;

enum class AttackMode {
  LumpedAcceleration,  // victim dynamics v' = u + xi while in CACC
  MessageLevel,        // received V2V fields are rewritten
};

// How xi(t) maps onto the fields of a falsified message.
struct MessageFalsification {
  enum class Kind {
    // offsets = weight * xi(t), per field
    FieldOffsets,
    // a fake trajectory accelerating at xi relative to the true sender:
    // acceleration + xi, velocity + int xi, position + double-int xi
    Kinematic,
  };
  Kind kind{Kind::FieldOffsets};
  double position_weight{0.0};      // s^2
  double velocity_weight{0.0};      // s
  double acceleration_weight{1.0};
};

struct AttackSpec {
  std::set<int> targets;  // 1-based follower indices; never the leader
  AttackMode mode{AttackMode::LumpedAcceleration};
  AttackSignal signal{ConstantSignal{}};
  double xi_max{2.0};  // m/s^2
  double t_start{0.0};
  double t_end{0.0};   // active on [t_start, t_end)
  MessageFalsification falsification{};

  bool active_at(double t) const { return t >= t_start && t < t_end; }
  bool targets_vehicle(int i) const { return targets.contains(i); }

  void validate(int vehicle_count) const {
    if (!(xi_max > 0.0)) throw std::invalid_argument("attack xi_max must be positive");
    if (!(t_end >= t_start)) throw std::invalid_argument("attack window needs t_end >= t_start");
    for (int i : targets) {
      if (i == 1) throw std::invalid_argument("the leader cannot be an attack target");
      if (i < 2 || i > vehicle_count)
        throw std::invalid_argument("attack target " + std::to_string(i) + " out of range");
    }
    if (const auto* tab = std::get_if<SampleTableSignal>(&signal)) {
      if (tab->times.empty() || tab->times.size() != tab->values.size())
        throw std::invalid_argument("sample table needs matching, nonempty times and values");
      if (!std::is_sorted(tab->times.begin(), tab->times.end()))
        throw std::invalid_argument("sample table times must be nondecreasing");
    }
  }
};

namespace detail {

inline double raw_signal(const AttackSignal& sig, double tau) {
  return std::visit(
      [tau](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ConstantSignal>) {
          return s.amplitude;
        } else if constexpr (std::is_same_v<T, RampSignal>) {
          return s.initial + s.slope * tau;
        } else if constexpr (std::is_same_v<T, SinusoidSignal>) {
          return s.amplitude * std::sin(s.angular_frequency * tau + s.phase);
        } else {
          if (tau <= s.times.front()) return s.values.front();
          if (tau >= s.times.back()) return s.values.back();
          const auto it = std::upper_bound(s.times.begin(), s.times.end(), tau);
          const auto k = static_cast<std::size_t>(it - s.times.begin());
          const double t0 = s.times[k - 1], t1 = s.times[k];
          if (t1 == t0) return s.values[k];
          return s.values[k - 1] + (s.values[k] - s.values[k - 1]) * (tau - t0) / (t1 - t0);
        }
      },
      sig);
}

}  // namespace detail

/// xi(t): zero outside the window, clamped to [-xi_max, xi_max] inside.
inline double attack_signal(const AttackSpec& spec, double t) {
  if (!spec.active_at(t)) return 0.0;
  return std::clamp(detail::raw_signal(spec.signal, t - spec.t_start), -spec.xi_max, spec.xi_max);
}

struct FalsificationOffsets {
  double position{0.0};
  double velocity{0.0};
  double acceleration{0.0};
};

/// Field offsets applied to every message a targeted vehicle receives at t.
/// Kinematic offsets integrate xi from the window start with 5-point
/// Gauss-Legendre panels of at most one second.
inline FalsificationOffsets falsification_offsets(const AttackSpec& spec, double t) {
  if (!spec.active_at(t)) return {};
  const double xi = attack_signal(spec, t);
  const auto& f = spec.falsification;
  if (f.kind == MessageFalsification::Kind::FieldOffsets)
    return {f.position_weight * xi, f.velocity_weight * xi, f.acceleration_weight * xi};

  static constexpr std::array<double, 5> nodes{-0.9061798459386640, -0.5384693101056831, 0.0,
                                               0.5384693101056831, 0.9061798459386640};
  static constexpr std::array<double, 5> weights{0.2369268850561891, 0.4786286704993665,
                                                 0.5688888888888889, 0.4786286704993665,
                                                 0.2369268850561891};
  const double span = t - spec.t_start;
  const int panels = std::max(1, static_cast<int>(std::ceil(span)));
  const double width = span / panels;
  double dv = 0.0, dx = 0.0;
  for (int p = 0; p < panels && width > 0.0; ++p) {
    const double mid = spec.t_start + (p + 0.5) * width;
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      const double s = mid + 0.5 * width * nodes[q];
      const double w = 0.5 * width * weights[q] * attack_signal(spec, s);
      dv += w;
      dx += w * (t - s);  // Cauchy: double integral = int (t - s) xi(s) ds
    }
  }
  return {dx, dv, xi};
}

/// Rewrites a received message. Inactive attack leaves it untouched.
inline NeighborMessage falsify_message(const NeighborMessage& msg, const AttackSpec& spec, double t) {
  const auto off = falsification_offsets(spec, t);
  return {msg.position + off.position, msg.velocity + off.velocity,
          msg.acceleration + off.acceleration, msg.sender_id};
}

struct DetectorModel {
  double p_report_given_attack{0.7};
  double p_report_given_benign{0.1};
  double sampling_period{0.1};  // s

  void validate() const {
    const auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(p_report_given_attack) || !prob(p_report_given_benign))
      throw std::invalid_argument("detector probabilities must lie in [0, 1]");
    if (!(sampling_period > 0.0)) throw std::invalid_argument("detector sampling period must be positive");
  }
};

enum class Report { Reported, NotReported };

inline const char* to_string(Report r) { return r == Report::Reported ? "r" : "nr"; }

struct DetectorReport {
  Report value{Report::NotReported};
  double timestamp{0.0};
};

/// One chance-node realisation. Consumes exactly one draw.
inline DetectorReport detector_sample(bool attack_active, const DetectorModel& model, Rng& rng,
                                      double t = 0.0) {
  const double p = attack_active ? model.p_report_given_attack : model.p_report_given_benign;
  return {rng.bernoulli(p) ? Report::Reported : Report::NotReported, t};
}

}  // namespace platoon
