#pragma once

#include "fbmpc/controllers/wbc.hpp"
#include "fbmpc/harness/model_io.hpp"
#include "fbmpc/mpc/mpc.hpp"

namespace fbmpc {

enum class ControllerKind { Riccati, Wbc };

inline const char* to_string(ControllerKind k) { return k == ControllerKind::Riccati ? "riccati" : "wbc"; }

inline ControllerKind controller_from_string(const std::string& s) {
  if (s == "riccati") return ControllerKind::Riccati;
  if (s == "wbc") return ControllerKind::Wbc;
  throw InvalidConfig("controller must be 'riccati' or 'wbc', got '" + s + "'");
}

/// Gait generator parameters. Times are absolute seconds and should sit on
/// the MPC node grid.
struct Gait {
  std::string type = "stand";  ///< stand | trot | jump
  double start = 0.5;          ///< first liftoff
  int count = 0;               ///< trot steps or jumps
  double swing = 0.2;          ///< trot swing duration
  double double_support = 0.0;
  double step_length = 0.05;
  double swing_height = 0.06;
  double flight = 0.2;  ///< jump flight duration
  double ground = 0.5;  ///< stance between jumps
  double jump_length = 0.0;
};

/// Push at the CoM of `body`: a constant force impulse/duration over
/// [time, time + duration), or an ideal impulse when duration is 0.
struct Disturbance {
  double time = 0.0;
  std::string body = "base";
  Vector2d impulse = Vector2d::Zero();  ///< world frame [N s]
  double duration = 0.1;
};

struct SimConfig {
  double restitution = 0.0;
  int substeps = 8;              ///< RK4 substeps per control tick
  double latency = 0.0025;       ///< MPC message transport delay [s]
  double baumgarte_freq = 20.0;  ///< ground-contact drift correction
  double baumgarte_damping = 1.0;
  double q_noise = 0.0;  ///< measurement noise std (tangent coordinates)
  double v_noise = 0.0;
  double mu = 0.7;  ///< friction coefficient used for the slip audit
};

/// Regression checks evaluated on the run; absent fields are skipped.
struct ScenarioChecks {
  std::optional<double> max_com_drift;
  std::optional<double> push_tolerance;  ///< CoM distance to the nominal CoM
  std::optional<double> push_within;     ///< seconds after each push
  std::optional<int> jumps;
};

struct Scenario {
  std::string name = "scenario";
  std::string task = "stand";  ///< stand | balance-push | walk | jump | multi-jump
  std::filesystem::path model_path;
  double duration = 1.0;
  ControllerKind controller = ControllerKind::Riccati;
  std::uint64_t seed = 0;
  ControlOptions control{};
  MpcConfig mpc{};
  SolverOptions solver{};
  ProblemOptions problem{};
  CostWeights weights{};
  WbcGains wbc{};
  WbcOptions wbc_options{};
  SimConfig sim{};
  Gait gait{};
  std::vector<Disturbance> disturbances;
  ScenarioChecks checks{};

  void validate(const RobotModel& model) const {
    static const char* tasks[] = {"stand", "balance-push", "walk", "jump", "multi-jump"};
    if (std::find(std::begin(tasks), std::end(tasks), task) == std::end(tasks)) {
      throw InvalidConfig("unknown task '" + task + "'");
    }
    if (!(duration > 0.0)) throw InvalidConfig("scenario duration must be > 0");
    control.validate();
    mpc.validate();
    wbc.validate();
    if (sim.substeps < 1) throw InvalidConfig("simulator substeps must be >= 1");
    if (sim.latency < 0.0) throw InvalidConfig("latency must be >= 0");
    if (sim.restitution < 0.0 || sim.restitution > 1.0) throw InvalidConfig("restitution must lie in [0, 1]");
    if (sim.q_noise < 0.0 || sim.v_noise < 0.0) throw InvalidConfig("noise levels must be >= 0");
    const double ratio = 1.0 / (mpc.update_rate * control.control_dt);
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0) {
      throw InvalidConfig("MPC period must be a whole number of control ticks");
    }
    const double lead = mpc.expected_delay / control.control_dt;
    if (std::abs(lead - std::round(lead)) > 1e-9 || lead > std::round(ratio) - 1.0 + 1e-9) {
      throw InvalidConfig("expected delay must be a whole number of control ticks shorter than the MPC period");
    }
    for (const auto& d : disturbances) {
      model.body_index(d.body);
      if (d.time < 0.0 || d.duration < 0.0) throw InvalidConfig("disturbance time and duration must be >= 0");
    }
    if (gait.type != "stand" && gait.type != "trot" && gait.type != "jump") {
      throw InvalidConfig("gait type must be stand, trot or jump");
    }
    if (gait.count < 0 || gait.start < 0.0 || gait.swing <= 0.0 || gait.flight <= 0.0 || gait.ground < 0.0 ||
        gait.double_support < 0.0 || gait.swing_height < 0.0) {
      throw InvalidConfig("invalid gait parameters");
    }
  }
};

/// Contact schedule produced by the scenario gait, covering `duration`
/// seconds of stance after the last event.
inline ContactSchedule make_schedule(const RobotModel& model, const Gait& g, const VectorXd& q0, double duration) {
  ContactSchedule s = standing_schedule(model, q0, duration);
  const int nf = s.num_feet();
  if (g.type == "trot") {
    if (nf != 4) throw InvalidConfig("trot gait needs four feet");
    const int pair[2][2] = {{0, 3}, {1, 2}};
    for (int f = 0; f < nf; ++f) {
      Vector2d p = s.feet[f].initial_placement;
      double clock = 0.0;
      for (int k = 0; k < g.count; ++k) {
        if (f != pair[k % 2][0] && f != pair[k % 2][1]) continue;
        const double lift = g.start + k * (g.swing + g.double_support);
        p.x() += k == 0 ? 0.5 * g.step_length : g.step_length;
        s.feet[f].phases.push_back({lift - clock, g.swing, p, g.swing_height});
        clock = lift + g.swing;
      }
    }
  } else if (g.type == "jump") {
    for (int f = 0; f < nf; ++f) {
      Vector2d p = s.feet[f].initial_placement;
      double clock = 0.0;
      for (int k = 0; k < g.count; ++k) {
        const double lift = g.start + k * (g.flight + g.ground);
        p.x() += g.jump_length;
        s.feet[f].phases.push_back({lift - clock, g.flight, p, g.swing_height});
        clock = lift + g.flight;
      }
    }
  }
  s.validate();
  return s;
}

/// Intervals in which the schedule has every foot inactive.
inline std::vector<std::pair<double, double>> scheduled_flights(const ContactSchedule& s, double t_end, double dt) {
  std::vector<std::pair<double, double>> out;
  bool in = false;
  double t0 = 0.0;
  for (int k = 0; k * dt < t_end; ++k) {
    const double t = (k + 0.5) * dt;
    bool any = false;
    for (int f = 0; f < s.num_feet(); ++f) any = any || s.active(f, t);
    if (!any && !in) {
      in = true;
      t0 = k * dt;
    } else if (any && in) {
      in = false;
      out.push_back({t0, k * dt});
    }
  }
  if (in) out.push_back({t0, t_end});
  return out;
}

// Scenario file (all sections but "model" optional):
//   { "name", "task", "model": path relative to the scenario file, "duration", "controller", "seed",
//     "control": { "dt", "baumgarte_freq", "baumgarte_damping" },
//     "mpc": { "horizon", "node_dt", "update_rate", "control_horizon_nodes", "expected_delay",
//              "iterations_per_step", "initial_iterations" },
//     "solver": { "mu_init", "max_iters" },
//     "problem": { "baumgarte_freq", "baumgarte_damping", "restitution", "mu", "lambda_min" },
//     "weights": { "posture": [nv], "velocity": [nv], "control": [nu], "force": [2], "quasi_static", "cone",
//                  "placement", "touchdown_placement", "contact_velocity", "state_bounds", "terminal" },
//     "wbc": { "K_e", "D_e", "K_sw", "D_sw", "K_l", "D_l", "D_k", "Kp_flight", "Kd_flight" },
//     "sim": { "restitution", "substeps", "latency", "baumgarte_freq", "baumgarte_damping",
//              "q_noise", "v_noise", "mu" },
//     "gait": { "type", "start", "count", "swing", "double_support", "step_length", "swing_height",
//               "flight", "ground", "jump_length" },
//     "disturbances": [{ "time", "body", "impulse": [x, y], "duration" }],
//     "checks": { "max_com_drift", "push_tolerance", "push_within", "jumps" } }

inline Scenario scenario_from_json(const Json& j, const std::filesystem::path& base_dir = {}) {
  using namespace io;
  check_keys(j, {"name", "task", "model", "duration", "controller", "seed", "control", "mpc", "solver", "problem",
                 "weights", "wbc", "sim", "gait", "disturbances", "checks"},
             "scenario");
  Scenario s;
  s.name = get_or<std::string>(j, "name", s.name, "scenario");
  s.task = get_or<std::string>(j, "task", s.task, "scenario");
  const std::filesystem::path mp = get<std::string>(j, "model", "scenario");
  s.model_path = mp.is_absolute() ? mp : base_dir / mp;
  s.duration = get_or<double>(j, "duration", s.duration, "scenario");
  s.controller = controller_from_string(get_or<std::string>(j, "controller", "riccati", "scenario"));
  s.seed = get_or<std::uint64_t>(j, "seed", 0, "scenario");

  if (j.contains("control")) {
    const Json& c = j.at("control");
    check_keys(c, {"dt", "baumgarte_freq", "baumgarte_damping"}, "control");
    s.control.control_dt = get_or<double>(c, "dt", s.control.control_dt, "control");
    s.control.baumgarte_freq = get_or<double>(c, "baumgarte_freq", s.control.baumgarte_freq, "control");
    s.control.baumgarte_damping = get_or<double>(c, "baumgarte_damping", s.control.baumgarte_damping, "control");
  }
  if (j.contains("mpc")) {
    const Json& c = j.at("mpc");
    check_keys(c, {"horizon", "node_dt", "update_rate", "control_horizon_nodes", "expected_delay",
                   "iterations_per_step", "initial_iterations"},
               "mpc");
    MpcConfig& m = s.mpc;
    m.horizon = get_or<double>(c, "horizon", m.horizon, "mpc");
    m.node_dt = get_or<double>(c, "node_dt", m.node_dt, "mpc");
    m.update_rate = get_or<double>(c, "update_rate", m.update_rate, "mpc");
    m.control_horizon_nodes = get_or<int>(c, "control_horizon_nodes", m.control_horizon_nodes, "mpc");
    m.expected_delay = get_or<double>(c, "expected_delay", m.expected_delay, "mpc");
    m.iterations_per_step = get_or<int>(c, "iterations_per_step", m.iterations_per_step, "mpc");
    m.initial_iterations = get_or<int>(c, "initial_iterations", m.initial_iterations, "mpc");
  }
  if (j.contains("solver")) {
    const Json& c = j.at("solver");
    check_keys(c, {"mu_init", "max_iters"}, "solver");
    s.solver.mu_init = get_or<double>(c, "mu_init", s.solver.mu_init, "solver");
    s.solver.max_iters = get_or<int>(c, "max_iters", s.solver.max_iters, "solver");
  }
  if (j.contains("problem")) {
    const Json& c = j.at("problem");
    check_keys(c, {"baumgarte_freq", "baumgarte_damping", "restitution", "mu", "lambda_min"}, "problem");
    ProblemOptions& p = s.problem;
    p.baumgarte_freq = get_or<double>(c, "baumgarte_freq", p.baumgarte_freq, "problem");
    p.baumgarte_damping = get_or<double>(c, "baumgarte_damping", p.baumgarte_damping, "problem");
    p.restitution = get_or<double>(c, "restitution", p.restitution, "problem");
    p.cone.mu = get_or<double>(c, "mu", p.cone.mu, "problem");
    p.cone.lambda_min = get_or<double>(c, "lambda_min", p.cone.lambda_min, "problem");
  }
  s.wbc_options.cone = s.problem.cone;
  if (j.contains("weights")) {
    const Json& c = j.at("weights");
    check_keys(c, {"posture", "velocity", "control", "force", "quasi_static", "cone", "placement",
                   "touchdown_placement", "contact_velocity", "state_bounds", "terminal"},
               "weights");
    CostWeights& w = s.weights;
    if (c.contains("posture")) w.posture = get_vector(c, "posture", "weights");
    if (c.contains("velocity")) w.velocity = get_vector(c, "velocity", "weights");
    if (c.contains("control")) w.control = get_vector(c, "control", "weights");
    if (c.contains("force")) w.force = get_vec2(c, "force", "weights");
    w.quasi_static = get_or<double>(c, "quasi_static", w.quasi_static, "weights");
    w.cone = get_or<double>(c, "cone", w.cone, "weights");
    w.placement = get_or<double>(c, "placement", w.placement, "weights");
    w.touchdown_placement = get_or<double>(c, "touchdown_placement", w.touchdown_placement, "weights");
    w.contact_velocity = get_or<double>(c, "contact_velocity", w.contact_velocity, "weights");
    w.state_bounds = get_or<double>(c, "state_bounds", w.state_bounds, "weights");
    w.terminal = get_or<double>(c, "terminal", w.terminal, "weights");
  }
  if (j.contains("wbc")) {
    const Json& c = j.at("wbc");
    check_keys(c, {"K_e", "D_e", "K_sw", "D_sw", "K_l", "D_l", "D_k", "Kp_flight", "Kd_flight"}, "wbc");
    WbcGains& g = s.wbc;
    g.K_e = get_or<double>(c, "K_e", g.K_e, "wbc");
    g.D_e = get_or<double>(c, "D_e", g.D_e, "wbc");
    g.K_sw = get_or<double>(c, "K_sw", g.K_sw, "wbc");
    g.D_sw = get_or<double>(c, "D_sw", g.D_sw, "wbc");
    g.K_l = get_or<double>(c, "K_l", g.K_l, "wbc");
    g.D_l = get_or<double>(c, "D_l", g.D_l, "wbc");
    g.D_k = get_or<double>(c, "D_k", g.D_k, "wbc");
    g.Kp_flight = get_or<double>(c, "Kp_flight", g.Kp_flight, "wbc");
    g.Kd_flight = get_or<double>(c, "Kd_flight", g.Kd_flight, "wbc");
  }
  if (j.contains("sim")) {
    const Json& c = j.at("sim");
    check_keys(c, {"restitution", "substeps", "latency", "baumgarte_freq", "baumgarte_damping", "q_noise", "v_noise",
                   "mu"},
               "sim");
    SimConfig& m = s.sim;
    m.restitution = get_or<double>(c, "restitution", m.restitution, "sim");
    m.substeps = get_or<int>(c, "substeps", m.substeps, "sim");
    m.latency = get_or<double>(c, "latency", m.latency, "sim");
    m.baumgarte_freq = get_or<double>(c, "baumgarte_freq", m.baumgarte_freq, "sim");
    m.baumgarte_damping = get_or<double>(c, "baumgarte_damping", m.baumgarte_damping, "sim");
    m.q_noise = get_or<double>(c, "q_noise", m.q_noise, "sim");
    m.v_noise = get_or<double>(c, "v_noise", m.v_noise, "sim");
    m.mu = get_or<double>(c, "mu", m.mu, "sim");
  }
  if (j.contains("gait")) {
    const Json& c = j.at("gait");
    check_keys(c, {"type", "start", "count", "swing", "double_support", "step_length", "swing_height", "flight",
                   "ground", "jump_length"},
               "gait");
    Gait& g = s.gait;
    g.type = get_or<std::string>(c, "type", g.type, "gait");
    g.start = get_or<double>(c, "start", g.start, "gait");
    g.count = get_or<int>(c, "count", g.count, "gait");
    g.swing = get_or<double>(c, "swing", g.swing, "gait");
    g.double_support = get_or<double>(c, "double_support", g.double_support, "gait");
    g.step_length = get_or<double>(c, "step_length", g.step_length, "gait");
    g.swing_height = get_or<double>(c, "swing_height", g.swing_height, "gait");
    g.flight = get_or<double>(c, "flight", g.flight, "gait");
    g.ground = get_or<double>(c, "ground", g.ground, "gait");
    g.jump_length = get_or<double>(c, "jump_length", g.jump_length, "gait");
  }
  if (j.contains("disturbances")) {
    for (const Json& d : j.at("disturbances")) {
      check_keys(d, {"time", "body", "impulse", "duration"}, "disturbance");
      s.disturbances.push_back({get<double>(d, "time", "disturbance"),
                                get_or<std::string>(d, "body", "base", "disturbance"),
                                get_vec2(d, "impulse", "disturbance"), get_or<double>(d, "duration", 0.1, "disturbance")});
    }
  }
  if (j.contains("checks")) {
    const Json& c = j.at("checks");
    check_keys(c, {"max_com_drift", "push_tolerance", "push_within", "jumps"}, "checks");
    if (c.contains("max_com_drift")) s.checks.max_com_drift = get<double>(c, "max_com_drift", "checks");
    if (c.contains("push_tolerance")) s.checks.push_tolerance = get<double>(c, "push_tolerance", "checks");
    if (c.contains("push_within")) s.checks.push_within = get<double>(c, "push_within", "checks");
    if (c.contains("jumps")) s.checks.jumps = get<int>(c, "jumps", "checks");
  }
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(io::read_json_file(path), path.parent_path());
}

}  // namespace fbmpc
