#pragma once

// Serialisation of traces and analysis results. Doubles are written in the
// shortest form that round-trips, so outputs are byte-stable.

#include <charconv>
#include <ostream>
#include <string>
#include <system_error>

#include <json.hpp>

#include "platoon/game.hpp"
#include "platoon/lyapunov.hpp"
#include "platoon/sim.hpp"

namespace platoon {

inline std::string format_double(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) return "nan";
  return {buf, end};
}

/// Columns: t, then x_1 v_1 u_1 for the leader, then for each follower i:
/// x_i v_i u_i eps_i mode_i xi_i.
inline void write_trace_csv(std::ostream& os, const SimTrace& tr) {
  const auto nz = static_cast<std::size_t>(tr.vehicle_count);
  os << "t,x1,v1,u1";
  for (std::size_t k = 1; k < nz; ++k) {
    const auto i = std::to_string(k + 1);
    os << ",x" << i << ",v" << i << ",u" << i << ",eps" << i << ",mode" << i << ",xi" << i;
  }
  os << '\n';
  for (std::size_t s = 0; s < tr.samples(); ++s) {
    os << format_double(tr.time[s]);
    for (std::size_t k = 0; k < nz; ++k) {
      os << ',' << format_double(tr.position[k][s]) << ',' << format_double(tr.velocity[k][s]) << ','
         << format_double(tr.command[k][s]);
      if (k == 0) continue;
      os << ',' << format_double(tr.spacing_error[k][s]) << ',' << to_string(tr.mode[k][s]) << ','
         << format_double(tr.attack[k][s]);
    }
    os << '\n';
  }
}

/// Whitespace-separated, one row per sample: t eps_2..eps_N gap_2..gap_N.
inline void write_spacing_dat(std::ostream& os, const SimTrace& tr) {
  const auto nz = static_cast<std::size_t>(tr.vehicle_count);
  os << "# t";
  for (std::size_t k = 1; k < nz; ++k) os << " eps" << k + 1;
  for (std::size_t k = 1; k < nz; ++k) os << " gap" << k + 1;
  os << '\n';
  for (std::size_t s = 0; s < tr.samples(); ++s) {
    os << format_double(tr.time[s]);
    for (std::size_t k = 1; k < nz; ++k) os << ' ' << format_double(tr.spacing_error[k][s]);
    for (std::size_t k = 1; k < nz; ++k) os << ' ' << format_double(tr.position[k - 1][s] - tr.position[k][s]);
    os << '\n';
  }
}

/// t v_1..v_N.
inline void write_velocity_dat(std::ostream& os, const SimTrace& tr) {
  const auto nz = static_cast<std::size_t>(tr.vehicle_count);
  os << "# t";
  for (std::size_t k = 0; k < nz; ++k) os << " v" << k + 1;
  os << '\n';
  for (std::size_t s = 0; s < tr.samples(); ++s) {
    os << format_double(tr.time[s]);
    for (std::size_t k = 0; k < nz; ++k) os << ' ' << format_double(tr.velocity[k][s]);
    os << '\n';
  }
}

inline nlohmann::json to_json(const BehavioralStrategy& s) {
  return {{"p_attack", s.attacker_p_attack},
          {"p_downgrade_given_r", s.defender_p_downgrade_given_r},
          {"p_downgrade_given_nr", s.defender_p_downgrade_given_nr}};
}

inline nlohmann::json metrics_json(const SimTrace& tr, const TraceMetrics& m, std::uint64_t seed) {
  nlohmann::json j;
  j["seed"] = seed;
  j["samples"] = tr.samples();
  j["end_time"] = tr.time.empty() ? 0.0 : tr.time.back();
  j["collision"] = m.collision;
  if (tr.collision)
    j["collision_event"] = {{"time", tr.collision->time}, {"vehicle", tr.collision->vehicle}, {"gap", tr.collision->gap}};
  j["min_spacing"] = m.min_spacing;
  j["sup_spacing_error"] = m.sup_spacing_error;
  j["cacc_occupancy"] = m.cacc_occupancy;
  j["string_stable"] = m.string_stable;
  j["first_amplifying_vehicle"] = m.first_amplifying_vehicle;
  std::vector<double> final_eps;
  for (const auto& e : tr.spacing_error) final_eps.push_back(e.empty() ? 0.0 : e.back());
  j["final_spacing_error"] = final_eps;
  j["mode_events"] = tr.mode_events.size();
  j["decisions"] = tr.decisions.size();
  if (tr.strategy) j["strategy"] = to_json(*tr.strategy);
  if (tr.lyapunov) j["lyapunov"] = {tr.lyapunov->p11, tr.lyapunov->p12, tr.lyapunov->p22};
  return j;
}

inline void write_mode_events(std::ostream& os, const SimTrace& tr) {
  os << "t,vehicle,mode,cause,required_dwell\n";
  for (const auto& e : tr.mode_events)
    os << format_double(e.time) << ',' << e.vehicle << ',' << to_string(e.mode) << ',' << to_string(e.cause) << ','
       << format_double(e.required_dwell) << '\n';
}

inline nlohmann::json certificate_json(const CertificateReport& r) {
  return {{"pass", r.pass},
          {"p_positive_definite", r.p_positive_definite},
          {"p_min_eigenvalue", r.p_min_eigenvalue},
          {"residual_max_eigenvalues", r.residual_max_eigenvalues},
          {"tol", r.tol}};
}

inline nlohmann::json inequalities_json(const GuesInequalityReport& r) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& i : r.items) items.push_back({{"name", i.name}, {"satisfied", i.satisfied}, {"ill_posed", i.ill_posed}});
  return {{"all_satisfied", r.all_satisfied()}, {"items", items}};
}

}  // namespace platoon
