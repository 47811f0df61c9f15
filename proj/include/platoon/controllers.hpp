#pragma once

// Upper-level CACC and ACC control laws and their z' = A z + B R forms.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "platoon/core.hpp"
#include "platoon/mat2.hpp"

namespace platoon {

enum class ControlMode { Cacc, Acc };

inline std::string_view to_string(ControlMode m) { return m == ControlMode::Cacc ? "CACC" : "ACC"; }

// Predecessor-leader CACC gains. The aggregates k1, k2 are what stability
// analysis constrains; the split between the two neighbours is free.
struct CaccGains {
  double alpha_pred{-0.79};
  double beta_pred{-1.255};
  double gamma_pred{0.5};
  double alpha_lead{-0.79};
  double beta_lead{-1.255};
  double gamma_lead{0.5};

  double k1() const { return alpha_pred + alpha_lead; }
  double k2() const { return beta_pred + beta_lead; }
  double gamma_sum() const { return gamma_pred + gamma_lead; }

  // Splits aggregate gains, giving `lead_share` of each to the leader term.
  static CaccGains from_aggregate(double k1, double k2, double lead_share = 0.5,
                                  double gamma_pred = 0.5, double gamma_lead = 0.5) {
    return {(1.0 - lead_share) * k1, (1.0 - lead_share) * k2, gamma_pred,
            lead_share * k1,         lead_share * k2,         gamma_lead};
  }

  void validate() const {
    if (!(k1() < 0.0) || !(k2() < 0.0))
      throw std::invalid_argument("CACC aggregate gains need k1 < 0 and k2 < 0");
  }
};

// Radar-only ACC toward the predecessor.
struct AccGains {
  double alpha{-0.25};
  double beta{-1.0};

  double k3() const { return alpha; }
  double k4() const { return beta; }

  void validate() const {
    if (!(alpha < 0.0) || !(beta < 0.0))
      throw std::invalid_argument("ACC gains need alpha < 0 and beta < 0");
  }
};

struct GainSet {
  CaccGains cacc;
  AccGains acc;

  Mat2 a_cacc() const { return Mat2::companion(cacc.k1(), cacc.k2()); }
  Mat2 a_acc() const { return Mat2::companion(acc.k3(), acc.k4()); }
};

/// CACC command for follower i from predecessor and leader messages.
/// Returns nullopt when either message is missing (communication loss).
inline std::optional<double> cacc_accel(int i, const VehicleState& own,
                                        const std::optional<NeighborMessage>& pred,
                                        const std::optional<NeighborMessage>& leader,
                                        const CaccGains& g, double gap) {
  if (i < 2) throw std::invalid_argument("CACC applies to followers (i >= 2)");
  if (!pred || !leader) return std::nullopt;
  const double l_pred = desired_distance(i, i - 1, gap);
  const double l_lead = desired_distance(i, 1, gap);
  return g.alpha_pred * (own.position - pred->position + l_pred) +
         g.beta_pred * (own.velocity - pred->velocity) + g.gamma_pred * pred->acceleration +
         g.alpha_lead * (own.position - leader->position + l_lead) +
         g.beta_lead * (own.velocity - leader->velocity) + g.gamma_lead * leader->acceleration;
}

/// ACC command for follower i from its radar return on vehicle i-1.
inline double acc_accel(int i, const VehicleState& own, const RadarMeasurement& radar,
                        const AccGains& g, double gap) {
  if (i < 2) throw std::invalid_argument("ACC applies to followers (i >= 2)");
  return g.alpha * (own.position - radar.position + gap) + g.beta * (own.velocity - radar.velocity);
}

enum class InputKind { Position, Velocity, Acceleration };

// One entry of the external input vector R.
struct InputEntry {
  InputKind kind;
  int neighbor;  // -1 = predecessor, +1 = leader (relative roles, not indices)
};

// z' = A z + B R for the follower state z = [x_i, v_i]. Row 0 of B is zero,
// so only the second row is stored.
struct ClosedLoopForm {
  Mat2 a;
  std::vector<double> b_row;
  std::vector<InputEntry> input_layout;

  Vec2 derivative(const Vec2& z, const std::vector<double>& r) const {
    if (r.size() != b_row.size()) throw std::invalid_argument("input vector size mismatch");
    Vec2 dz = a * z;
    for (std::size_t k = 0; k < r.size(); ++k) dz[1] += b_row[k] * r[k];
    return dz;
  }
};

inline constexpr int kPredecessor = -1;
inline constexpr int kLeader = 1;

/// Assembles A and B. CACC inputs are ordered [x_j - L_ij], [v_j], [a_j] with
/// j = (predecessor, leader) inside each block; ACC uses the predecessor only
/// and carries a zero acceleration column.
inline ClosedLoopForm assemble_closed_loop(ControlMode mode, const GainSet& g) {
  ClosedLoopForm f;
  if (mode == ControlMode::Cacc) {
    const auto& c = g.cacc;
    f.a = Mat2::companion(c.k1(), c.k2());
    f.b_row = {-c.alpha_pred, -c.alpha_lead, -c.beta_pred, -c.beta_lead, c.gamma_pred, c.gamma_lead};
    f.input_layout = {{InputKind::Position, kPredecessor},     {InputKind::Position, kLeader},
                      {InputKind::Velocity, kPredecessor},     {InputKind::Velocity, kLeader},
                      {InputKind::Acceleration, kPredecessor}, {InputKind::Acceleration, kLeader}};
  } else {
    f.a = Mat2::companion(g.acc.k3(), g.acc.k4());
    f.b_row = {-g.acc.alpha, -g.acc.beta, 0.0};
    f.input_layout = {{InputKind::Position, kPredecessor},
                      {InputKind::Velocity, kPredecessor},
                      {InputKind::Acceleration, kPredecessor}};
  }
  return f;
}

/// Builds R for follower i matching `form.input_layout`.
inline std::vector<double> input_vector(const ClosedLoopForm& form, int i,
                                        const NeighborMessage& pred, const NeighborMessage& leader,
                                        double gap) {
  std::vector<double> r;
  r.reserve(form.input_layout.size());
  for (const auto& e : form.input_layout) {
    const auto& m = e.neighbor == kPredecessor ? pred : leader;
    const int j = e.neighbor == kPredecessor ? i - 1 : 1;
    switch (e.kind) {
      case InputKind::Position:
        r.push_back(m.position - desired_distance(i, j, gap));
        break;
      case InputKind::Velocity: r.push_back(m.velocity); break;
      case InputKind::Acceleration: r.push_back(m.acceleration); break;
    }
  }
  return r;
}

}  // namespace platoon
