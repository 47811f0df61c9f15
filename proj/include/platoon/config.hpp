#pragma once

// Scenario files: JSON with a strict schema. Every rejection names the
// offending JSON pointer; syntax errors carry line and column.

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "platoon/sim.hpp"
#include "platoon/string_stability.hpp"

namespace platoon {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

struct StringCheckConfig {
  ControlMode mode{ControlMode::Acc};
  std::optional<TransferFunction> transfer_function;  // overrides mode when set
  double omega_max{1e3};
  int grid_points{2000};
  double horizon{60.0};
};

struct SweepConfig {
  std::vector<double> xi_max;
  std::vector<double> epsilon_max;
  int runs_per_cell{4};
  int threads{0};  // 0: hardware concurrency
};

struct StabilityConfig {
  std::vector<double> z_norms{2.718281828459045};
  SearchBudget budget{};
};

struct ConfigDocument {
  ScenarioConfig scenario;
  StringCheckConfig string_check;
  std::optional<SweepConfig> sweep;
  StabilityConfig stability;
};

namespace detail {

using nlohmann::json;

// Cursor into the document that knows its own JSON pointer.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const json& raw() const { return j_; }
  const std::string& path() const { return path_.empty() ? root_ : path_; }

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(path(), what); }

  Node at(const std::string& key) const {
    if (!has(key)) throw ConfigError(path_ + "/" + key, "missing required key");
    return {j_.at(key), path_ + "/" + key};
  }
  Node at(std::size_t k) const { return {j_.at(k), path_ + "/" + std::to_string(k)}; }
  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

  const Node& object(std::initializer_list<const char*> allowed) const {
    if (!j_.is_object()) fail("expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j_.items())
      if (!ok.contains(k)) at(k).fail("unknown key");
    return *this;
  }

  std::size_t array_size() const {
    if (!j_.is_array()) fail("expected an array");
    return j_.size();
  }

  double number() const {
    if (!j_.is_number()) fail("expected a number");
    return j_.get<double>();
  }
  double number(const std::string& key, double fallback) const { return has(key) ? at(key).number() : fallback; }

  long long integer() const {
    if (!j_.is_number_integer() && !j_.is_number_unsigned()) fail("expected an integer");
    return j_.get<long long>();
  }
  int integer(const std::string& key, int fallback) const {
    return has(key) ? static_cast<int>(at(key).integer()) : fallback;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto n = at(key);
    if (!n.j_.is_boolean()) n.fail("expected true or false");
    return n.j_.get<bool>();
  }

  std::string string() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }

  std::vector<double> numbers() const {
    std::vector<double> out;
    for (std::size_t k = 0; k < array_size(); ++k) out.push_back(at(k).number());
    return out;
  }

  template <typename E>
  E choice(std::initializer_list<std::pair<const char*, E>> options) const {
    const auto s = string();
    std::string names;
    for (const auto& [name, value] : options) {
      if (s == name) return value;
      names += names.empty() ? name : std::string(", ") + name;
    }
    fail("expected one of: " + names);
  }

 private:
  const json& j_;
  std::string path_;
  inline static const std::string root_ = "/";
};

// Runs a semantic check and pins its message to a location.
template <typename Fn>
void checked(const Node& at, Fn&& fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    at.fail(e.what());
  }
}

inline CaccGains parse_cacc(const Node& n) {
  n.object({"alpha_pred", "beta_pred", "gamma_pred", "alpha_lead", "beta_lead", "gamma_lead", "k1", "k2",
            "lead_share"});
  CaccGains g;
  if (n.has("k1") || n.has("k2")) {
    for (const char* k : {"alpha_pred", "beta_pred", "alpha_lead", "beta_lead"})
      if (n.has(k)) n.at(k).fail("cannot be combined with aggregate k1/k2");
    const double share = n.number("lead_share", 0.5);
    if (!(share >= 0.0 && share <= 1.0)) n.at("lead_share").fail("must lie in [0, 1]");
    g = CaccGains::from_aggregate(n.number("k1", g.k1()), n.number("k2", g.k2()), share,
                                  n.number("gamma_pred", g.gamma_pred), n.number("gamma_lead", g.gamma_lead));
  } else {
    g.alpha_pred = n.number("alpha_pred", g.alpha_pred);
    g.beta_pred = n.number("beta_pred", g.beta_pred);
    g.gamma_pred = n.number("gamma_pred", g.gamma_pred);
    g.alpha_lead = n.number("alpha_lead", g.alpha_lead);
    g.beta_lead = n.number("beta_lead", g.beta_lead);
    g.gamma_lead = n.number("gamma_lead", g.gamma_lead);
  }
  return g;
}

inline GainSet parse_gains(const Node& n, GainSet g = {}) {
  n.object({"cacc", "acc"});
  if (n.has("cacc")) g.cacc = parse_cacc(n.at("cacc"));
  if (n.has("acc")) {
    const auto a = n.at("acc");
    a.object({"alpha", "beta"});
    g.acc.alpha = a.number("alpha", g.acc.alpha);
    g.acc.beta = a.number("beta", g.acc.beta);
  }
  return g;
}

inline PlatoonConfig parse_platoon(const Node& n) {
  n.object({"vehicle_count", "desired_gap", "vehicle_length", "epsilon_max", "leader"});
  PlatoonConfig p;
  p.vehicle_count = n.integer("vehicle_count", p.vehicle_count);
  p.desired_gap = n.number("desired_gap", p.desired_gap);
  p.vehicle_length = n.number("vehicle_length", p.vehicle_length);
  p.epsilon_max = n.number("epsilon_max", p.epsilon_max);
  if (n.has("leader")) {
    const auto l = n.at("leader");
    l.object({"initial_velocity", "segments"});
    p.leader.initial_velocity = l.number("initial_velocity", p.leader.initial_velocity);
    if (l.has("segments")) {
      const auto segs = l.at("segments");
      for (std::size_t k = 0; k < segs.array_size(); ++k) {
        const auto s = segs.at(k);
        s.object({"start", "end", "acceleration"});
        p.leader.segments.push_back({s.at("start").number(), s.at("end").number(), s.at("acceleration").number()});
      }
    }
  }
  checked(n, [&] { p.validate(); });
  return p;
}

inline AttackSignal parse_signal(const Node& n) {
  n.object({"type", "amplitude", "slope", "initial", "angular_frequency", "phase", "times", "values"});
  const auto type = n.has("type") ? n.at("type").string() : std::string("constant");
  if (type == "constant") return ConstantSignal{n.number("amplitude", 2.0)};
  if (type == "ramp") return RampSignal{n.number("slope", 0.0), n.number("initial", 0.0)};
  if (type == "sinusoid")
    return SinusoidSignal{n.number("amplitude", 0.0), n.number("angular_frequency", 1.0), n.number("phase", 0.0)};
  if (type == "table") {
    SampleTableSignal t;
    t.times = n.at("times").numbers();
    t.values = n.at("values").numbers();
    return t;
  }
  n.at("type").fail("expected one of: constant, ramp, sinusoid, table");
}

inline AttackSpec parse_attack(const Node& n, int vehicle_count) {
  n.object({"targets", "mode", "signal", "xi_max", "t_start", "t_end", "falsification"});
  AttackSpec a;
  const auto targets = n.at("targets");
  for (std::size_t k = 0; k < targets.array_size(); ++k) a.targets.insert(static_cast<int>(targets.at(k).integer()));
  if (n.has("mode"))
    a.mode = n.at("mode").choice<AttackMode>(
        {{"lumped", AttackMode::LumpedAcceleration}, {"message", AttackMode::MessageLevel}});
  if (n.has("signal")) a.signal = parse_signal(n.at("signal"));
  a.xi_max = n.number("xi_max", a.xi_max);
  a.t_start = n.number("t_start", a.t_start);
  a.t_end = n.number("t_end", a.t_end);
  if (n.has("falsification")) {
    const auto f = n.at("falsification");
    f.object({"kind", "position", "velocity", "acceleration"});
    const auto kind = f.at("kind").choice<MessageFalsification::Kind>(
        {{"offsets", MessageFalsification::Kind::FieldOffsets}, {"kinematic", MessageFalsification::Kind::Kinematic}});
    a.falsification.kind = kind;
    if (kind == MessageFalsification::Kind::Kinematic) {
      for (const char* k : {"position", "velocity", "acceleration"})
        if (f.has(k)) f.at(k).fail("weights only apply to kind \"offsets\"");
    } else {
      a.falsification.position_weight = f.number("position", 0.0);
      a.falsification.velocity_weight = f.number("velocity", 0.0);
      a.falsification.acceleration_weight = f.number("acceleration", 1.0);
    }
  }
  checked(n, [&] { a.validate(vehicle_count); });
  return a;
}

inline GameSpec parse_game(const Node* game, const Node* detector) {
  GameSpec g = default_game_spec();
  if (detector) {
    const auto& d = *detector;
    d.object({"p_report_given_attack", "p_report_given_benign", "sampling_period"});
    g.detector.p_report_given_attack = d.number("p_report_given_attack", g.detector.p_report_given_attack);
    g.detector.p_report_given_benign = d.number("p_report_given_benign", g.detector.p_report_given_benign);
    g.detector.sampling_period = d.number("sampling_period", g.detector.sampling_period);
    checked(d, [&] { g.detector.validate(); });
  }
  if (game && game->has("utilities")) {
    const auto u = game->at("utilities");
    if (u.array_size() != 8) u.fail("expected 8 [attacker, defender] pairs in leaf order");
    for (std::size_t k = 0; k < 8; ++k) {
      const auto pair = u.at(k);
      if (pair.array_size() != 2) pair.fail("expected [attacker, defender]");
      g.leaves[k] = {pair.at(0).number(), pair.at(1).number()};
    }
  }
  return g;
}

inline TransferFunction parse_tf(const Node& n) {
  n.object({"numerator", "denominator"});
  TransferFunction tf{n.at("numerator").numbers(), n.at("denominator").numbers()};
  checked(n, [&] { tf.validate(); });
  return tf;
}

inline ConfigDocument parse_document(const Node& root) {
  root.object({"platoon", "initial_offsets", "gains", "gain_overrides", "lyapunov", "attack", "detector", "game",
               "switching", "decision_period", "step", "duration", "seed", "string_check", "sweep", "stability"});
  ConfigDocument doc;
  auto& s = doc.scenario;
  if (root.has("platoon")) s.platoon = parse_platoon(root.at("platoon"));
  const int n = s.platoon.vehicle_count;

  if (root.has("initial_offsets")) {
    const auto offs = root.at("initial_offsets");
    if (offs.array_size() != static_cast<std::size_t>(n)) offs.fail("expected one entry per vehicle");
    for (std::size_t k = 0; k < offs.array_size(); ++k) {
      const auto o = offs.at(k);
      o.object({"position", "velocity"});
      s.initial_offsets.push_back({o.number("position", 0.0), o.number("velocity", 0.0)});
    }
  }
  if (root.has("gains")) s.gains = parse_gains(root.at("gains"));
  if (root.has("gain_overrides")) {
    const auto ov = root.at("gain_overrides");
    if (!ov.raw().is_object()) ov.fail("expected an object keyed by vehicle index");
    for (const auto& [key, value] : ov.raw().items()) {
      const auto node = ov.at(key);
      int i = 0;
      try {
        std::size_t used = 0;
        i = std::stoi(key, &used);
        if (used != key.size()) throw std::invalid_argument(key);
      } catch (const std::exception&) {
        node.fail("key must be a vehicle index");
      }
      if (i < 2 || i > n) node.fail("vehicle index out of range");
      s.gain_overrides[i] = parse_gains(node, s.gains);
    }
  }
  if (root.has("lyapunov")) {
    const auto l = root.at("lyapunov");
    if (l.raw().is_string()) {
      if (l.string() != "auto") l.fail("expected \"auto\" or {p11, p12, p22}");
    } else {
      l.object({"p11", "p12", "p22"});
      LyapunovCandidate c{l.at("p11").number(), l.at("p12").number(), l.at("p22").number()};
      if (!c.positive_definite()) l.fail("P must be positive definite");
      s.lyapunov = c;
    }
  }
  if (root.has("attack") && !root.at("attack").raw().is_null()) s.attack = parse_attack(root.at("attack"), n);

  std::optional<Node> game, detector;
  if (root.has("game")) {
    game.emplace(root.at("game"));
    game->object({"utilities", "selection"});
  }
  if (root.has("detector")) detector.emplace(root.at("detector"));
  s.game = parse_game(game ? &*game : nullptr, detector ? &*detector : nullptr);
  if (game && game->has("selection"))
    s.switching.selection = game->at("selection").choice<EquilibriumSelection>(
        {{"defender-best", EquilibriumSelection::DefenderBest}, {"first", EquilibriumSelection::First}});

  if (root.has("switching")) {
    const auto sw = root.at("switching");
    sw.object({"policy", "dwell", "safety", "release_fraction", "alternating"});
    if (sw.has("policy"))
      s.switching.policy = sw.at("policy").choice<SwitchingPolicy>({{"game", SwitchingPolicy::Game},
                                                                     {"alternating", SwitchingPolicy::Alternating},
                                                                     {"cacc-only", SwitchingPolicy::CaccOnly},
                                                                     {"acc-only", SwitchingPolicy::AccOnly}});
    s.switching.dwell_enabled = sw.boolean("dwell", true);
    s.switching.safety_enabled = sw.boolean("safety", true);
    s.switching.release_fraction = sw.number("release_fraction", 0.5);
    if (sw.has("alternating")) {
      const auto a = sw.at("alternating");
      a.object({"min_cacc_phase", "acc_phase_min", "acc_phase_max"});
      auto& alt = s.switching.alternating;
      alt.min_cacc_phase = a.number("min_cacc_phase", alt.min_cacc_phase);
      alt.acc_phase_min = a.number("acc_phase_min", alt.acc_phase_min);
      alt.acc_phase_max = a.number("acc_phase_max", alt.acc_phase_max);
    }
  }
  s.decision_period = root.number("decision_period", s.decision_period);
  s.step = root.number("step", s.step);
  s.duration = root.number("duration", s.duration);
  if (!(s.step > 0.0)) root.at("step").fail("must be positive");
  if (!(s.decision_period >= s.step))
    (root.has("decision_period") ? root.at("decision_period") : root).fail("decision_period must be at least step");
  if (!(s.duration > 0.0)) root.at("duration").fail("must be positive");
  if (!(s.switching.release_fraction >= 0.0 && s.switching.release_fraction < 1.0))
    root.at("switching").at("release_fraction").fail("must lie in [0, 1)");
  if (root.has("seed")) {
    const auto sd = root.at("seed");
    if (!sd.raw().is_number_unsigned()) sd.fail("expected a nonnegative integer");
    s.seed = sd.raw().get<std::uint64_t>();
  }
  // Gain signs are checked by the consumers: `stability` reports them as
  // named inequalities instead of rejecting the file.

  if (root.has("string_check")) {
    const auto sc = root.at("string_check");
    sc.object({"mode", "transfer_function", "omega_max", "grid_points", "horizon"});
    auto& c = doc.string_check;
    if (sc.has("mode"))
      c.mode = sc.at("mode").choice<ControlMode>({{"acc", ControlMode::Acc}, {"cacc", ControlMode::Cacc}});
    if (sc.has("transfer_function")) c.transfer_function = parse_tf(sc.at("transfer_function"));
    c.omega_max = sc.number("omega_max", c.omega_max);
    c.grid_points = sc.integer("grid_points", c.grid_points);
    c.horizon = sc.number("horizon", c.horizon);
    if (!(c.omega_max > 0.0) || c.grid_points < 3 || !(c.horizon > 0.0))
      sc.fail("needs omega_max > 0, grid_points >= 3 and horizon > 0");
  }
  if (root.has("sweep")) {
    const auto sw = root.at("sweep");
    sw.object({"xi_max", "epsilon_max", "runs_per_cell", "threads"});
    SweepConfig c;
    c.xi_max = sw.at("xi_max").numbers();
    c.epsilon_max = sw.at("epsilon_max").numbers();
    c.runs_per_cell = sw.integer("runs_per_cell", c.runs_per_cell);
    c.threads = sw.integer("threads", c.threads);
    if (c.xi_max.empty() || c.epsilon_max.empty() || c.runs_per_cell < 1 || c.threads < 0)
      sw.fail("needs nonempty xi_max and epsilon_max, runs_per_cell >= 1 and threads >= 0");
    doc.sweep = c;
  }
  if (root.has("stability")) {
    const auto st = root.at("stability");
    st.object({"z_norms", "grid", "refinements"});
    if (st.has("z_norms")) doc.stability.z_norms = st.at("z_norms").numbers();
    for (double z : doc.stability.z_norms)
      if (!(z >= 0.0)) st.at("z_norms").fail("norms must be nonnegative");
    doc.stability.budget.grid = st.integer("grid", doc.stability.budget.grid);
    doc.stability.budget.refinements = st.integer("refinements", doc.stability.budget.refinements);
    if (doc.stability.budget.grid < 3 || doc.stability.budget.refinements < 0)
      st.fail("needs grid >= 3 and refinements >= 0");
  }
  return doc;
}

// 1-based line and column of a byte offset.
inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t k = 0; k < offset && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

inline ConfigDocument parse_config_text(const std::string& text, const std::string& source = "<config>") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto offset = e.byte == 0 ? 0 : e.byte - 1;
    const auto [line, col] = detail::line_column(text, offset);
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col), "JSON syntax error");
  }
  return detail::parse_document(detail::Node(j, ""));
}

inline ConfigDocument load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, "cannot open file");
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_config_text(text, path);
}

}  // namespace platoon
