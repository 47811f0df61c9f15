#pragma once

// Command-line front end. Exit codes: 0 ok, 1 input error, 2 domain outcome
// (collision, failed certificate, string instability, unverified game).

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "platoon/config.hpp"
#include "platoon/game.hpp"
#include "platoon/lyapunov.hpp"
#include "platoon/report.hpp"
#include "platoon/sim.hpp"
#include "platoon/string_stability.hpp"

namespace platoon {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitDomain = 2;
inline constexpr const char* kOutDirEnv = "PLATOON_OUT_DIR";

struct CommandRequest {
  std::string subcommand;
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  int verbosity{0};
};

namespace cli_detail {

inline void write_file(const std::filesystem::path& p, const std::string& body) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << body;
}

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

inline std::string polynomial(const std::vector<double>& p) {
  std::string s;
  for (int k = static_cast<int>(p.size()) - 1; k >= 0; --k) {
    const double c = p[static_cast<std::size_t>(k)];
    if (c == 0.0) continue;
    if (!s.empty()) s += c < 0.0 ? " - " : " + ";
    else if (c < 0.0) s += "-";
    const double a = std::abs(c);
    if (k == 0 || a != 1.0) s += format_double(a);
    if (k >= 1) s += (k == 1 || a == 1.0 ? "" : " ") + std::string(k == 1 ? "s" : "s^" + std::to_string(k));
  }
  return s.empty() ? "0" : s;
}

inline int cmd_simulate(const CommandRequest& req, const ConfigDocument& doc, std::ostream& out) {
  auto cfg = doc.scenario;
  if (req.seed) cfg.seed = *req.seed;
  const auto tr = run_scenario(cfg);
  const auto m = trace_metrics(tr, req.tol.value_or(1e-6));
  const std::filesystem::path dir(req.out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "trace.csv", render([&](std::ostream& os) { write_trace_csv(os, tr); }));
  write_file(dir / "spacing.dat", render([&](std::ostream& os) { write_spacing_dat(os, tr); }));
  write_file(dir / "velocity.dat", render([&](std::ostream& os) { write_velocity_dat(os, tr); }));
  write_file(dir / "modes.csv", render([&](std::ostream& os) { write_mode_events(os, tr); }));
  write_file(dir / "metrics.json", metrics_json(tr, m, cfg.seed).dump(2) + "\n");

  out << "policy " << to_string(cfg.switching.policy) << ", seed " << cfg.seed << ", " << tr.samples()
      << " samples\n";
  if (tr.strategy)
    out << "defender strategy: P(d|r) = " << format_double(tr.strategy->defender_p_downgrade_given_r)
        << ", P(d|nr) = " << format_double(tr.strategy->defender_p_downgrade_given_nr) << '\n';
  out << "min spacing " << format_double(m.min_spacing) << " m\n";
  for (int i = 2; i <= tr.vehicle_count; ++i) {
    const auto k = static_cast<std::size_t>(i - 1);
    out << "vehicle " << i << ": sup|eps| " << format_double(m.sup_spacing_error[k]) << ", final eps "
        << format_double(tr.spacing_error[k].back()) << ", CACC " << format_double(100.0 * m.cacc_occupancy[k])
        << "%\n";
  }
  out << "string stable: " << (m.string_stable ? "yes" : "no") << '\n';
  if (req.verbosity > 0)
    for (const auto& e : tr.mode_events)
      out << "  t=" << format_double(e.time) << " vehicle " << e.vehicle << " -> " << to_string(e.mode) << " ("
          << to_string(e.cause) << ")\n";
  if (tr.collision) {
    out << "COLLISION at t=" << format_double(tr.collision->time) << " s, vehicle " << tr.collision->vehicle << '\n';
    return kExitDomain;
  }
  out << "no collision\n";
  return kExitOk;
}

inline int cmd_stability(const CommandRequest& req, const ConfigDocument& doc, std::ostream& out) {
  const auto& g = doc.scenario.gains;
  const double tol = req.tol.value_or(kDefiniteTol);
  const Mat2 ac = g.a_cacc(), aa = g.a_acc();
  const std::vector<Mat2> systems{ac, aa};
  nlohmann::json j;

  const auto bibo_line = [&](const char* name, double kp, double kv) {
    const auto b = check_real_pole_condition(kp, kv);
    out << name << ": k_pos " << format_double(kp) << ", k_vel " << format_double(kv) << ", Hurwitz "
        << (b.hurwitz ? "yes" : "no") << ", real-pole condition " << (b.real_poles ? "yes" : "no") << '\n';
    return nlohmann::json{{"k_pos", kp}, {"k_vel", kv}, {"hurwitz", b.hurwitz}, {"real_poles", b.real_poles}};
  };
  j["cacc"] = bibo_line("CACC", g.cacc.k1(), g.cacc.k2());
  j["acc"] = bibo_line("ACC", g.acc.k3(), g.acc.k4());

  std::optional<LyapunovCandidate> p = doc.scenario.lyapunov;
  j["p_source"] = p ? "config" : "search";
  if (!p) p = find_common_lyapunov(systems, doc.stability.budget);
  const std::filesystem::path dir(req.out_dir);
  std::filesystem::create_directories(dir);
  if (!p) {
    out << "no certificate found within the search budget (this is not a proof that none exists)\n";
    j["pass"] = false;
    write_file(dir / "stability.json", j.dump(2) + "\n");
    return kExitDomain;
  }
  out << "P = [[" << format_double(p->p11) << ", " << format_double(p->p12) << "], [" << format_double(p->p12) << ", "
      << format_double(p->p22) << "]] (" << j["p_source"].get<std::string>() << ")\n";
  j["p"] = {p->p11, p->p12, p->p22};

  const auto cert = check_common_lyapunov(*p, systems, tol);
  j["certificate"] = certificate_json(cert);
  out << "common Lyapunov certificate: " << (cert.pass ? "PASS" : "FAIL") << " (lambda_min(P) "
      << format_double(cert.p_min_eigenvalue) << ", lambda_max residuals CACC "
      << format_double(cert.residual_max_eigenvalues[0]) << ", ACC " << format_double(cert.residual_max_eigenvalues[1])
      << ")\n";

  const auto ineq = check_gues_inequalities(g.cacc.k1(), g.cacc.k2(), g.acc.k3(), g.acc.k4(), *p);
  j["inequalities"] = inequalities_json(ineq);
  for (const auto& i : ineq.items)
    out << "  " << (i.satisfied ? "ok   " : "FAIL ") << i.name << (i.ill_posed ? " (ill-posed)" : "") << '\n';

  if (cert.pass) {
    const auto k = lyapunov_constants(*p, ac);
    j["constants"] = {{"a", k.a}, {"b", k.b}, {"c", k.c}, {"lambda", k.lambda}};
    out << "a = " << format_double(k.a) << ", b = " << format_double(k.b) << ", c = " << format_double(k.c)
        << ", lambda = " << format_double(k.lambda) << " 1/s\n";
    nlohmann::json dwell = nlohmann::json::array();
    for (double z : doc.stability.z_norms) {
      const auto d = min_dwell_time(z, z, k);
      dwell.push_back({{"z_norm", z}, {"tau_simplified", d.tau_simplified}, {"tau_tight", d.tau_tight},
                       {"required", d.required()}});
      out << "  |z| = " << format_double(z) << ": tau_simplified " << format_double(d.tau_simplified)
          << " s, tau_tight " << format_double(d.tau_tight) << " s, required " << format_double(d.required())
          << " s\n";
    }
    j["dwell"] = dwell;
  }
  const bool pass = cert.pass && ineq.all_satisfied();
  j["pass"] = pass;
  write_file(dir / "stability.json", j.dump(2) + "\n");
  if (!pass) {
    if (const auto* f = ineq.first_failure()) out << "first failed inequality: " << f->name << '\n';
    return kExitDomain;
  }
  return kExitOk;
}

inline int cmd_game(const CommandRequest& req, const ConfigDocument& doc, std::ostream& out) {
  const auto& spec = doc.scenario.game;
  const double tol = req.tol.value_or(kGapTol);
  const auto sol = solve_security_game(spec, doc.scenario.switching.selection);
  nlohmann::json j;
  j["detector"] = {{"p_report_given_attack", spec.detector.p_report_given_attack},
                   {"p_report_given_benign", spec.detector.p_report_given_benign}};
  out << "detector: P(r|attack) = " << format_double(spec.detector.p_report_given_attack)
      << ", P(r|no attack) = " << format_double(spec.detector.p_report_given_benign) << '\n';
  out << "normal form (attacker, defender):\n";
  const auto& nf = sol.normal_form.payoffs;
  for (int r = 0; r < 2; ++r) {
    out << (r == 0 ? "  a  " : "  na ");
    for (int c = 0; c < nf.cols; ++c) out << " (" << format_double(nf.a(r, c)) << ", " << format_double(nf.b(r, c)) << ")";
    out << '\n';
  }
  out << sol.nash.equilibria.size() << " equilibri" << (sol.nash.equilibria.size() == 1 ? "um" : "a")
      << (sol.nash.degenerate ? " (degenerate game: representative points)" : "") << '\n';
  bool verified = true;
  nlohmann::json eqs = nlohmann::json::array();
  for (std::size_t k = 0; k < sol.nash.equilibria.size(); ++k) {
    const auto& e = sol.nash.equilibria[k];
    const auto b = to_behavioral(e.profile.p_row0, e.profile.cols);
    const auto [ga, gd] = best_response_gap(spec, b);
    verified = verified && ga <= tol && gd <= tol && e.row_gap <= tol && e.col_gap <= tol;
    out << (k == sol.selected ? "* " : "  ") << "P(attack) = " << format_double(b.attacker_p_attack)
        << ", P(d|r) = " << format_double(b.defender_p_downgrade_given_r)
        << ", P(d|nr) = " << format_double(b.defender_p_downgrade_given_nr) << ", values ("
        << format_double(e.row_value) << ", " << format_double(e.col_value) << "), gaps (" << format_double(ga)
        << ", " << format_double(gd) << ")\n";
    auto ej = to_json(b);
    ej["attacker_value"] = e.row_value;
    ej["defender_value"] = e.col_value;
    ej["gap_attacker"] = ga;
    ej["gap_defender"] = gd;
    ej["defender_mixed"] = e.profile.cols;
    eqs.push_back(ej);
  }
  j["equilibria"] = eqs;
  j["selected"] = sol.selected;
  j["degenerate"] = sol.nash.degenerate;
  j["verified"] = verified;
  const std::filesystem::path dir(req.out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "game.json", j.dump(2) + "\n");
  out << (verified ? "all best-response gaps within " : "best-response gap exceeds ") << format_double(tol) << '\n';
  return verified ? kExitOk : kExitDomain;
}

inline int cmd_string_check(const CommandRequest& req, const ConfigDocument& doc, std::ostream& out) {
  const auto& sc = doc.string_check;
  const double tol = req.tol.value_or(1e-9);
  const TransferFunction h = sc.transfer_function ? *sc.transfer_function : spacing_error_tf(sc.mode, doc.scenario.gains);
  h.validate();
  out << "H(s) = (" << polynomial(h.numerator) << ") / (" << polynomial(h.denominator) << ")\n";
  if (!is_stable(h)) throw std::invalid_argument("H(s) has poles outside the open left half plane; norm undefined");
  const auto n = hinf_norm(h, sc.omega_max, sc.grid_points);
  const bool nonneg = impulse_response_nonneg(h, sc.horizon);
  const bool pass = n.value <= 1.0 + tol && nonneg;
  out << "||H||_inf = " << format_double(n.value) << " at omega = " << format_double(n.omega) << " rad/s\n";
  out << "impulse response nonnegative: " << (nonneg ? "yes" : "no") << '\n';
  out << "string stable: " << (pass ? "yes" : "no") << '\n';
  nlohmann::json j{{"numerator", h.numerator}, {"denominator", h.denominator}, {"hinf", n.value},
                   {"omega", n.omega}, {"impulse_nonnegative", nonneg}, {"string_stable", pass}};
  const std::filesystem::path dir(req.out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "string_check.json", j.dump(2) + "\n");
  return pass ? kExitOk : kExitDomain;
}

struct SweepCell {
  double xi_max;
  double epsilon_max;
  int runs{0};
  int collisions{0};
  double min_spacing{std::numeric_limits<double>::infinity()};
};

// Each cell overrides the attack bound (and a constant signal's amplitude)
// and the safety threshold, then runs seeds seed .. seed + runs - 1.
inline int cmd_sweep(const CommandRequest& req, const ConfigDocument& doc, std::ostream& out) {
  if (!doc.sweep) throw ConfigError("/sweep", "missing required key");
  if (!doc.scenario.attack) throw ConfigError("/attack", "sweep needs an attack to scale");
  const auto& sw = *doc.sweep;
  const std::uint64_t base_seed = req.seed.value_or(doc.scenario.seed);

  std::vector<SweepCell> cells;
  for (double xi : sw.xi_max)
    for (double em : sw.epsilon_max) cells.push_back({xi, em});
  // Validate every cell up front so workers never see bad input.
  std::vector<ScenarioConfig> cfgs;
  for (const auto& c : cells) {
    auto cfg = doc.scenario;
    cfg.attack->xi_max = c.xi_max;
    if (auto* k = std::get_if<ConstantSignal>(&cfg.attack->signal)) k->amplitude = c.xi_max;
    cfg.platoon.epsilon_max = c.epsilon_max;
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("/sweep", std::string("cell xi_max=") + format_double(c.xi_max) +
                                      " epsilon_max=" + format_double(c.epsilon_max) + ": " + e.what());
    }
    cfgs.push_back(std::move(cfg));
  }

  const std::size_t tasks = cells.size() * static_cast<std::size_t>(sw.runs_per_cell);
  std::vector<std::optional<TraceMetrics>> results(tasks);
  std::atomic<std::size_t> next{0};
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const auto workers = static_cast<unsigned>(
      std::min<std::size_t>(tasks, sw.threads > 0 ? static_cast<unsigned>(sw.threads) : hw));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t t; (t = next.fetch_add(1)) < tasks;) {
          auto cfg = cfgs[t / static_cast<std::size_t>(sw.runs_per_cell)];
          cfg.seed = base_seed + t % static_cast<std::size_t>(sw.runs_per_cell);
          results[t] = trace_metrics(run_scenario(cfg));
        }
      });
  }

  std::ostringstream csv;
  csv << "xi_max,epsilon_max,runs,collisions,collision_rate,min_spacing\n";
  for (std::size_t c = 0; c < cells.size(); ++c) {
    auto& cell = cells[c];
    for (int r = 0; r < sw.runs_per_cell; ++r) {
      const auto& m = *results[c * static_cast<std::size_t>(sw.runs_per_cell) + static_cast<std::size_t>(r)];
      ++cell.runs;
      cell.collisions += m.collision ? 1 : 0;
      cell.min_spacing = std::min(cell.min_spacing, m.min_spacing);
    }
    const double rate = static_cast<double>(cell.collisions) / cell.runs;
    csv << format_double(cell.xi_max) << ',' << format_double(cell.epsilon_max) << ',' << cell.runs << ','
        << cell.collisions << ',' << format_double(rate) << ',' << format_double(cell.min_spacing) << '\n';
    if (req.verbosity > 0)
      out << "xi_max " << format_double(cell.xi_max) << ", epsilon_max " << format_double(cell.epsilon_max) << ": "
          << cell.collisions << "/" << cell.runs << " collisions\n";
  }
  const std::filesystem::path dir(req.out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "sweep.csv", csv.str());
  out << cells.size() << " cells x " << sw.runs_per_cell << " runs on " << workers
      << (workers == 1 ? " thread -> " : " threads -> ")
      << (dir / "sweep.csv").string() << '\n';
  return kExitOk;
}

}  // namespace cli_detail

/// Parses args (without the program name) and runs one subcommand.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Platoon CACC/ACC switching simulator and analysis tools", "platoon"};
  app.require_subcommand(1);
  CommandRequest req;
  std::uint64_t seed = 0;
  double tol = 0.0;
  const char* env_dir = std::getenv(kOutDirEnv);
  req.out_dir = env_dir && *env_dir ? env_dir : "out";

  const std::vector<std::pair<const char*, const char*>> subcommands{
      {"simulate", "Run a scenario and write trace.csv, metrics.json, spacing.dat, velocity.dat"},
      {"stability", "Check the common Lyapunov certificate, gain inequalities and dwell bounds"},
      {"game", "Solve the security game and verify best-response gaps"},
      {"string-check", "H-infinity norm and impulse-sign string stability test"},
      {"sweep", "Collision rates over an xi_max x epsilon_max grid, in parallel"}};
  for (const auto& [name, help] : subcommands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", req.config_path, "Scenario JSON file")->required();
    sub->add_option("--out", req.out_dir, std::string("Output directory (default $") + kOutDirEnv + " or ./out)");
    sub->add_option("--seed", seed, "Override the scenario seed");
    sub->add_option("--tol", tol, "Verification tolerance")->check(CLI::PositiveNumber);
    sub->add_flag("-v,--verbose", req.verbosity, "More output (repeatable)");
  }

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  auto* sub = app.get_subcommands().front();
  req.subcommand = sub->get_name();
  if (sub->count("--seed") > 0) req.seed = seed;
  if (sub->count("--tol") > 0) req.tol = tol;

  try {
    const auto doc = load_config(req.config_path);
    if (req.subcommand == "simulate") return cli_detail::cmd_simulate(req, doc, out);
    if (req.subcommand == "stability") return cli_detail::cmd_stability(req, doc, out);
    if (req.subcommand == "game") return cli_detail::cmd_game(req, doc, out);
    if (req.subcommand == "string-check") return cli_detail::cmd_string_check(req, doc, out);
    return cli_detail::cmd_sweep(req, doc, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace platoon
