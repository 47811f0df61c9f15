#pragma once

// Platoon domain types and open-loop longitudinal dynamics.
//
// Vehicles are numbered from 1 (the leader) towards the tail. Positions are
// absolute 1-D road coordinates, so followers sit at smaller x than their
// predecessors and the spacing error of vehicle i is x_i - x_{i-1} + L.

#include <cmath>
#include <cstdlib>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace platoon {

struct VehicleState {
  double position{0.0};  // m
  double velocity{0.0};  // m/s

  bool finite() const { return std::isfinite(position) && std::isfinite(velocity); }
  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

struct StateDerivative {
  double velocity{0.0};      // dx/dt
  double acceleration{0.0};  // dv/dt
  friend bool operator==(const StateDerivative&, const StateDerivative&) = default;
};

// Constant-acceleration interval [start, end) of the leader's profile.
struct AccelSegment {
  double start{0.0};
  double end{0.0};
  double acceleration{0.0};
};

// Leader velocity as piecewise-constant acceleration on top of a cruise speed.
// Segments may not overlap; outside every segment the leader cruises.
struct LeaderProfile {
  double initial_velocity{20.0};
  std::vector<AccelSegment> segments;

  double acceleration(double t) const {
    for (const auto& s : segments)
      if (t >= s.start && t < s.end) return s.acceleration;
    return 0.0;
  }

  void validate() const {
    if (!std::isfinite(initial_velocity))
      throw std::invalid_argument("leader initial velocity must be finite");
    for (std::size_t k = 0; k < segments.size(); ++k) {
      const auto& s = segments[k];
      if (!(s.end > s.start) || !std::isfinite(s.acceleration))
        throw std::invalid_argument("leader segment " + std::to_string(k) +
                                    " must have end > start and finite acceleration");
      for (std::size_t j = 0; j < k; ++j)
        if (s.start < segments[j].end && segments[j].start < s.end)
          throw std::invalid_argument("leader segments " + std::to_string(j) + " and " +
                                      std::to_string(k) + " overlap");
    }
  }
};

struct PlatoonConfig {
  int vehicle_count{4};
  double desired_gap{10.0};     // L, m
  double vehicle_length{4.5};   // m
  double epsilon_max{4.0};      // safety-surface threshold on |spacing error|, m
  LeaderProfile leader;

  void validate() const {
    if (vehicle_count < 2) throw std::invalid_argument("vehicle_count must be at least 2");
    if (!(vehicle_length > 0.0)) throw std::invalid_argument("vehicle_length must be positive");
    if (!(desired_gap > vehicle_length))
      throw std::invalid_argument("desired_gap must exceed vehicle_length");
    if (!(epsilon_max > 0.0) || !(epsilon_max < desired_gap - vehicle_length))
      throw std::invalid_argument(
          "epsilon_max must lie in (0, desired_gap - vehicle_length) so the safety surface "
          "precedes contact");
    leader.validate();
  }
};

// V2V payload. sender_id is a 1-based vehicle index.
struct NeighborMessage {
  double position{0.0};
  double velocity{0.0};
  double acceleration{0.0};
  int sender_id{1};
};

// Radar return on the predecessor: no acceleration channel.
struct RadarMeasurement {
  double position{0.0};
  double velocity{0.0};
};

// Snapshot of every vehicle; vehicle(i) is 1-based.
struct PlatoonState {
  std::vector<VehicleState> vehicles;

  int size() const { return static_cast<int>(vehicles.size()); }

  const VehicleState& vehicle(int i) const {
    if (i < 1 || i > size()) throw std::out_of_range("vehicle index " + std::to_string(i));
    return vehicles[static_cast<std::size_t>(i - 1)];
  }
  VehicleState& vehicle(int i) {
    if (i < 1 || i > size()) throw std::out_of_range("vehicle index " + std::to_string(i));
    return vehicles[static_cast<std::size_t>(i - 1)];
  }

  // Equally spaced at the desired gap, all at the same speed, leader at x = 0.
  static PlatoonState at_equilibrium(int n, double gap, double speed) {
    PlatoonState s;
    s.vehicles.reserve(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) s.vehicles.push_back({-gap * (i - 1), speed});
    return s;
  }
};

/// Spacing error of vehicle i (2 <= i <= N): x_i - x_{i-1} + L.
/// Positive means the follower is closer than the desired gap.
inline double spacing_error(const PlatoonState& state, int i, double gap) {
  if (i < 2 || i > state.size())
    throw std::out_of_range("spacing error needs 2 <= i <= N, got " + std::to_string(i));
  return state.vehicle(i).position - state.vehicle(i - 1).position + gap;
}

/// Desired distance between i and j: L times the number of hops.
inline double desired_distance(int i, int j, double gap) {
  if (i == j) throw std::invalid_argument("desired distance needs i != j");
  return gap * std::abs(i - j);
}

/// Double-integrator derivative for every vehicle. commands holds one entry per
/// vehicle; the leader's entry is ignored in favour of its profile acceleration.
inline std::vector<StateDerivative> platoon_derivative(const PlatoonState& state,
                                                       std::span<const double> commands,
                                                       double leader_acceleration) {
  if (commands.size() != state.vehicles.size())
    throw std::invalid_argument("expected " + std::to_string(state.vehicles.size()) +
                                " acceleration commands, got " + std::to_string(commands.size()));
  std::vector<StateDerivative> d(state.vehicles.size());
  for (std::size_t k = 0; k < d.size(); ++k)
    d[k] = {state.vehicles[k].velocity, k == 0 ? leader_acceleration : commands[k]};
  return d;
}

}  // namespace platoon
