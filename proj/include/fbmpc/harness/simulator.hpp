#pragma once

#include <bit>
#include <chrono>
#include <deque>
#include <random>

#include "fbmpc/controllers/riccati.hpp"
#include "fbmpc/harness/scenario.hpp"
#include "fbmpc/multibody/centroidal.hpp"

namespace fbmpc {

class SolverFailure : public Error {
public:
  using Error::Error;
};

/// World-frame velocity Jacobian (2 x nv) of the CoM of `body`.
inline MatrixXd body_com_jacobian(const RobotModel& model, const VectorXd& q, int body) {
  const KinematicsData<double> data = kinematics(model, q, VectorXd::Zero(model.nv()));
  const MatrixXd Jb = body_jacobians(model, data)[body];
  const Vector2d& c = model.bodies[body].com;
  MatrixXd local = Jb.bottomRows(2);
  local.row(0) += -c.y() * Jb.row(0);
  local.row(1) += c.x() * Jb.row(0);
  const double th = data.world[body].theta;
  Eigen::Matrix2d R;
  R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  return R * local;
}

/// Ground-truth plant: rigid point feet on the plane y = 0. Feet in contact
/// stick to their touchdown anchor until the contact would pull; swinging
/// feet touch down when they cross the ground while descending.
class GroundSim {
public:
  struct Foot {
    bool contact = false;
    bool armed = false;  ///< may touch down; cleared by an elastic landing until the foot rises
    Vector2d anchor = Vector2d::Zero();
  };
  struct Event {
    double time;
    int foot;
    bool touchdown;  ///< false: liftoff
  };

  static constexpr double kHysteresis = 1e-6;
  /// Accepted pulling impulse [N s] or closing velocity [m/s] at a landing;
  /// with several stance feet the split of a landing impulse is nearly indeterminate.
  static constexpr double kImpulseTolerance = 1e-3;

  GroundSim(const RobotModel& model, const SimConfig& cfg, const VectorXd& x0)
      : model_(&model), cfg_(cfg), S_(model), feet_(model.contacts.size()) {
    check_dim(x0.size(), model.nx(), "initial state");
    q_ = x0.head(model.nq());
    v_ = x0.tail(model.nv());
    for (std::size_t f = 0; f < feet_.size(); ++f) {
      const Vector2d p = frame_position(model, q_, static_cast<int>(f));
      feet_[f].contact = p.y() <= kHysteresis;
      feet_[f].armed = !feet_[f].contact;
      feet_[f].anchor = {p.x(), 0.0};
    }
  }

  VectorXd state() const {
    VectorXd x(model_->nx());
    x << q_, v_;
    return x;
  }
  const VectorXd& q() const { return q_; }
  const VectorXd& v() const { return v_; }
  const std::vector<Foot>& feet() const { return feet_; }
  const std::vector<Event>& events() const { return events_; }

  ContactSet contact_set() const {
    ContactSet cs;
    cs.baumgarte_freq = cfg_.baumgarte_freq;
    cs.baumgarte_damping = cfg_.baumgarte_damping;
    for (std::size_t f = 0; f < feet_.size(); ++f) {
      if (!feet_[f].contact) continue;
      cs.frames.push_back(static_cast<int>(f));
      cs.anchors.push_back(feet_[f].anchor);
    }
    return cs;
  }

  /// Releases feet so that stance forces push and released feet do not
  /// accelerate into the ground; returns the world-frame force of every foot.
  VectorXd resolve(const VectorXd& u, double t) {
    std::vector<int> stance;
    for (std::size_t f = 0; f < feet_.size(); ++f) {
      if (feet_[f].contact) stance.push_back(static_cast<int>(f));
    }
    ContactSolution best;
    const std::vector<int> keep = complementary_subset(stance, 1e-6, [&](const std::vector<int>& on, ContactSolution& sol) {
      ContactSet cs;
      cs.baumgarte_freq = cfg_.baumgarte_freq;
      cs.baumgarte_damping = cfg_.baumgarte_damping;
      cs.frames = on;
      for (int f : on) cs.anchors.push_back(feet_[f].anchor);
      sol = contact_forward_dynamics(*model_, q_, v_, u, cs, tau_ext_);
      double worst = 0.0;
      for (std::size_t c = 0; c < on.size(); ++c) worst = std::max(worst, -sol.forces[2 * c + 1]);
      const std::vector<int> off = minus(stance, on);
      if (!off.empty()) {
        const VectorXd acc = contact_jacobian(*model_, q_, off) * sol.acceleration + frame_acceleration_bias(*model_, q_, v_, off);
        for (std::size_t c = 0; c < off.size(); ++c) worst = std::max(worst, -acc[2 * c + 1]);
      }
      return worst;
    }, best);
    for (int f : minus(stance, keep)) {
      feet_[f].contact = false;
      feet_[f].armed = true;
      events_.push_back({t, f, false});
    }
    VectorXd all = VectorXd::Zero(2 * static_cast<Eigen::Index>(feet_.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) all.segment<2>(2 * keep[c]) = best.forces.segment<2>(2 * c);
    return all;
  }

  /// RK4 over one control tick with u held; contacts fixed within a substep.
  void step(const VectorXd& u, double t, double dt) {
    const int n = cfg_.substeps;
    const double h = dt / n;
    for (int s = 0; s < n; ++s) {
      const ContactSet cs = contact_set();
      auto acc = [&](const VectorXd& q, const VectorXd& v) {
        return VectorXd(contact_forward_dynamics(*model_, q, v, u, cs, tau_ext_).acceleration);
      };
      const VectorXd a1 = acc(q_, v_);
      const VectorXd v2 = v_ + 0.5 * h * a1;
      const VectorXd a2 = acc(S_.integrate_velocity(q_, v_, 0.5 * h), v2);
      const VectorXd v3 = v_ + 0.5 * h * a2;
      const VectorXd a3 = acc(S_.integrate_velocity(q_, v2, 0.5 * h), v3);
      const VectorXd v4 = v_ + h * a3;
      const VectorXd a4 = acc(S_.integrate_velocity(q_, v3, h), v4);
      q_ = S_.integrate_velocity(q_, (v_ + 2.0 * v2 + 2.0 * v3 + v4) / 6.0, h);
      v_ += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
      detect_touchdown(t + (s + 1) * h);
    }
  }

  /// World force at the CoM of `body`, held until cleared.
  void set_external_force(int body, const Vector2d& force) {
    if (tau_ext_.size() == 0) tau_ext_ = VectorXd::Zero(model_->nv());
    tau_ext_ += body_com_jacobian(*model_, q_, body).transpose() * force;
  }
  void clear_external_force() { tau_ext_.resize(0); }

  /// Ideal impulse at the CoM of `body`; feet in contact absorb it inelastically.
  void push(int body, const Vector2d& impulse, double t) {
    const MatrixXd Jp = body_com_jacobian(*model_, q_, body);
    const Eigen::LLT<MatrixXd> M(mass_matrix(*model_, q_));
    v_ += M.solve(Jp.transpose() * impulse);
    apply_impulse({}, 0.0, t);
  }

private:
  void detect_touchdown(double t) {
    std::vector<int> hits;
    for (std::size_t f = 0; f < feet_.size(); ++f) {
      Foot& ft = feet_[f];
      if (ft.contact) continue;
      const int id = static_cast<int>(f);
      const Vector2d p = frame_position(*model_, q_, id);
      if (p.y() > kHysteresis) ft.armed = true;
      if (ft.armed && p.y() <= 0.0 && frame_velocity(*model_, q_, v_, id).y() < 0.0) hits.push_back(id);
    }
    if (!hits.empty()) apply_impulse(hits, cfg_.restitution, t);
  }

  // Contact-gain impulse with `gained` joining the stance set. The impulse
  // acts on the subset of stance and landing feet whose normal impulses push
  // while every other candidate leaves the ground.
  void apply_impulse(const std::vector<int>& gained, double e, double t) {
    std::vector<int> cand;
    for (std::size_t f = 0; f < feet_.size(); ++f) {
      if (feet_[f].contact) cand.push_back(static_cast<int>(f));
    }
    cand.insert(cand.end(), gained.begin(), gained.end());
    std::sort(cand.begin(), cand.end());
    ImpulseSolution best;
    const std::vector<int> on = complementary_subset(cand, kImpulseTolerance, [&](const std::vector<int>& set, ImpulseSolution& sol) {
      ContactSet cs;
      cs.frames = set;
      if (set.empty()) {
        sol.post_velocity = v_;
      } else {
        sol = impulse_dynamics(*model_, q_, v_, cs, e);
      }
      double worst = 0.0;
      for (std::size_t c = 0; c < set.size(); ++c) worst = std::max(worst, -sol.impulses[2 * c + 1]);
      for (int f : minus(cand, set)) worst = std::max(worst, -frame_velocity(*model_, q_, sol.post_velocity, f).y());
      return worst;
    }, best);
    v_ = best.post_velocity;
    for (int f : cand) {
      const bool in = std::find(on.begin(), on.end(), f) != on.end();
      const bool landing = std::find(gained.begin(), gained.end(), f) != gained.end();
      if (landing && in) {
        const Vector2d p = frame_position(*model_, q_, f);
        // an elastic landing leaves the foot separating
        feet_[f].contact = e == 0.0;
        feet_[f].armed = false;
        feet_[f].anchor = {p.x(), 0.0};
        events_.push_back({t, f, true});
      } else if (!landing && !in) {
        feet_[f].contact = false;
        feet_[f].armed = true;
        events_.push_back({t, f, false});
      }
    }
  }

  static std::vector<int> minus(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out;
    for (int f : a) {
      if (std::find(b.begin(), b.end(), f) == b.end()) out.push_back(f);
    }
    return out;
  }

  // Searches subsets of `cand`, largest first, for one whose complementarity
  // violation is within `tol`; otherwise returns the least violating one.
  template <typename Sol, typename Fn>
  static std::vector<int> complementary_subset(const std::vector<int>& cand, double tol, Fn&& violation, Sol& best) {
    const int n = static_cast<int>(cand.size());
    std::vector<unsigned> masks(1u << n);
    for (unsigned m = 0; m < masks.size(); ++m) masks[m] = m;
    std::stable_sort(masks.begin(), masks.end(),
                     [](unsigned a, unsigned b) { return std::popcount(a) > std::popcount(b); });
    std::vector<int> pick;
    double lowest = std::numeric_limits<double>::infinity();
    for (unsigned m : masks) {
      std::vector<int> set;
      for (int i = 0; i < n; ++i) {
        if (m >> i & 1u) set.push_back(cand[i]);
      }
      Sol sol;
      double v;
      try {
        v = violation(set, sol);
      } catch (const RankDeficientContacts&) {
        continue;
      }
      if (v < lowest) {
        lowest = v;
        pick = set;
        best = std::move(sol);
        if (v <= tol) break;
      }
    }
    return pick;
  }

  const RobotModel* model_;
  SimConfig cfg_;
  MultibodyStateSpace S_;
  VectorXd q_, v_;
  std::vector<Foot> feet_;
  std::vector<Event> events_;
  VectorXd tau_ext_;
};

/// One control tick of the closed loop.
struct TickRecord {
  double t = 0.0;
  VectorXd u_cmd, u_meas;
  VectorXd x, x_ref;
  double k = 0.0, k_ref = 0.0;  ///< centroidal angular momentum
  VectorXd lambda, lambda_ref;  ///< world-frame foot forces, 2 per foot
  std::vector<int> contact, planned;
  Vector2d com = Vector2d::Zero(), com_ref = Vector2d::Zero();
  bool degraded = false, fallback = false;
};

struct SolverRecord {
  double t = 0.0;
  std::string status;
  int iterations = 0;
  double cost = 0.0, gap = 0.0;
  bool degraded = false;
};

struct SimMetrics {
  int ticks = 0;
  int torque_violations = 0;         ///< controller ticks x joints beyond the torque box
  int solver_torque_violations = 0;  ///< feed-forward torques beyond the box in any message
  double max_torque_excess = 0.0;
  double max_com_drift = 0.0;  ///< from the initial CoM
  double max_com_error = 0.0;  ///< from the reference CoM
  double max_joint_error = 0.0;
  double momentum_error_integral = 0.0;  ///< integral of |k - k_ref| dt
  int flights = 0;                       ///< observed intervals with no foot on the ground
  int jumps_completed = 0;               ///< scheduled flights matched by an observed, landed flight
  std::vector<double> push_recovery;     ///< seconds until the CoM stays within the push tolerance
  int degraded_messages = 0;
  int held_ticks = 0;
  int fallback_ticks = 0;
  int slip_ticks = 0;  ///< foot forces outside the friction cone (contacts are sticky)
  double min_base_height = 0.0;
};

struct CheckResult {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct SimResult {
  std::string scenario;
  ControllerKind controller = ControllerKind::Riccati;
  std::vector<std::string> foot_names;
  std::vector<TickRecord> ticks;
  std::vector<SolverRecord> solver;
  std::vector<GroundSim::Event> events;
  SimMetrics metrics;
  std::vector<CheckResult> checks;
  bool aborted = false;
  std::string abort_dump;
  double wall_time = 0.0;  ///< seconds; not part of any written artifact

  bool checks_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
  }
};

/// Summary metrics from the recorded series.
inline SimMetrics compute_metrics(const RobotModel& model, const Scenario& sc, const ContactSchedule& schedule,
                                  const SimResult& r) {
  SimMetrics m;
  const int nu = model.nu(), nq = model.nq();
  const double dt = sc.control.control_dt;
  const VectorXd lo = model.torque_lower(), hi = model.torque_upper();
  m.ticks = static_cast<int>(r.ticks.size());
  if (r.ticks.empty()) return m;
  const Vector2d c0 = r.ticks.front().com;
  m.min_base_height = std::numeric_limits<double>::infinity();
  const double mu = sc.sim.mu;
  for (const TickRecord& k : r.ticks) {
    for (int j = 0; j < nu; ++j) {
      const double excess = std::max(k.u_cmd[j] - hi[j], lo[j] - k.u_cmd[j]);
      m.max_torque_excess = std::max(m.max_torque_excess, excess);
      if (excess > 1e-12) ++m.torque_violations;
    }
    m.max_com_drift = std::max(m.max_com_drift, (k.com - c0).norm());
    m.max_com_error = std::max(m.max_com_error, (k.com - k.com_ref).norm());
    m.max_joint_error = std::max(m.max_joint_error, inf_norm(VectorXd(k.x.segment(3, nq - 3) - k.x_ref.segment(3, nq - 3))));
    m.momentum_error_integral += std::abs(k.k - k.k_ref) * dt;
    m.held_ticks += k.degraded;
    m.fallback_ticks += k.fallback;
    m.min_base_height = std::min(m.min_base_height, k.x[1]);
    for (std::size_t f = 0; f < k.contact.size(); ++f) {
      if (!k.contact[f]) continue;
      const double tx = k.lambda[2 * f], ny = k.lambda[2 * f + 1];
      if (std::abs(tx) > mu * ny + 1e-9) ++m.slip_ticks;
    }
  }
  for (const SolverRecord& s : r.solver) m.degraded_messages += s.degraded;

  // observed flights: maximal runs with no foot on the ground that end in a landing
  std::vector<std::pair<double, double>> observed;
  double start = -1.0;
  for (const TickRecord& k : r.ticks) {
    const bool air = std::none_of(k.contact.begin(), k.contact.end(), [](int c) { return c != 0; });
    if (air && start < 0.0) start = k.t;
    if (!air && start >= 0.0) {
      observed.push_back({start, k.t});
      start = -1.0;
    }
  }
  m.flights = static_cast<int>(observed.size());
  const double t_end = r.ticks.back().t + dt;
  for (const auto& [a, b] : scheduled_flights(schedule, t_end, sc.mpc.node_dt)) {
    const bool hit = std::any_of(observed.begin(), observed.end(), [&](const auto& o) {
      return o.first < b && o.second > a && o.second - o.first >= 0.25 * (b - a);
    });
    m.jumps_completed += hit;
  }

  if (sc.checks.push_tolerance) {
    const double tol = *sc.checks.push_tolerance;
    for (std::size_t i = 0; i < sc.disturbances.size(); ++i) {
      const double tp = sc.disturbances[i].time;
      const double next = i + 1 < sc.disturbances.size() ? sc.disturbances[i + 1].time : t_end;
      double recovered = tp;
      bool any = false;
      for (const TickRecord& k : r.ticks) {
        if (k.t < tp || k.t >= next) continue;
        any = true;
        if ((k.com - c0).norm() >= tol) recovered = k.t + dt;
      }
      m.push_recovery.push_back(any && recovered < next ? recovered - tp : std::numeric_limits<double>::infinity());
    }
  }
  return m;
}

inline std::vector<CheckResult> evaluate_checks(const Scenario& sc, const SimResult& r) {
  std::vector<CheckResult> out;
  const SimMetrics& m = r.metrics;
  out.push_back({"finite_state", r.aborted ? 1.0 : 0.0, 0.0, !r.aborted});
  out.push_back({"torque_violations", double(m.torque_violations + m.solver_torque_violations), 0.0,
                 m.torque_violations + m.solver_torque_violations == 0});
  if (sc.checks.max_com_drift) {
    out.push_back({"max_com_drift", m.max_com_drift, *sc.checks.max_com_drift, m.max_com_drift < *sc.checks.max_com_drift});
  }
  if (sc.checks.push_tolerance && sc.checks.push_within) {
    for (std::size_t i = 0; i < m.push_recovery.size(); ++i) {
      out.push_back({"push_recovery_" + std::to_string(i), m.push_recovery[i], *sc.checks.push_within,
                     m.push_recovery[i] <= *sc.checks.push_within});
    }
  }
  if (sc.checks.jumps) {
    out.push_back({"jumps_completed", double(m.jumps_completed), double(*sc.checks.jumps),
                   m.jumps_completed >= *sc.checks.jumps});
  }
  return out;
}

/// Closed loop: MPC at its rate, controller and plant at the control rate.
class Simulation {
public:
  Simulation(const RobotModel& model, Scenario scenario) : model_(&model), sc_(std::move(scenario)) {
    sc_.validate(model);
  }

  const Scenario& scenario() const { return sc_; }

  VectorXd initial_state() const {
    VectorXd x = VectorXd::Zero(model_->nx());
    x.head(model_->nq()) = model_->neutral_configuration();
    return x;
  }

  ContactSchedule schedule() const {
    const double tail = sc_.duration + sc_.mpc.horizon + 1.0;
    return make_schedule(*model_, sc_.gait, initial_state().head(model_->nq()), tail);
  }

  SimResult run(ControllerKind kind) {
    const auto wall0 = std::chrono::steady_clock::now();
    const RobotModel& model = *model_;
    const int nu = model.nu(), nc = static_cast<int>(model.contacts.size());
    const double dt = sc_.control.control_dt;
    const int ticks = static_cast<int>(std::lround(sc_.duration / dt));
    const int every = static_cast<int>(std::lround(1.0 / (sc_.mpc.update_rate * dt)));
    // updates start one expected delay ahead of the MPC period so that the
    // predicted initial state falls on the node at which the policy arrives
    const int lead = static_cast<int>(std::lround(sc_.mpc.expected_delay / dt));
    const VectorXd lo = model.torque_lower(), hi = model.torque_upper();

    SimResult res;
    res.scenario = sc_.name;
    res.controller = kind;
    for (const auto& c : model.contacts) res.foot_names.push_back(c.name);

    const ContactSchedule sched = schedule();
    const VectorXd x0 = initial_state();
    GroundSim plant(model, sc_.sim, x0);
    std::mt19937_64 rng(sc_.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const MultibodyStateSpace S(model);
    auto measure = [&](const VectorXd& x) {
      if (sc_.sim.q_noise == 0.0 && sc_.sim.v_noise == 0.0) return x;
      VectorXd dx(2 * model.nv());
      for (int i = 0; i < model.nv(); ++i) dx[i] = sc_.sim.q_noise * normal(rng);
      for (int i = 0; i < model.nv(); ++i) dx[model.nv() + i] = sc_.sim.v_noise * normal(rng);
      return S.integrate(x, dx);
    };

    Mpc mpc(model, sched, sc_.weights, sc_.mpc, sc_.problem, sc_.solver);
    RiccatiController riccati(model, sc_.control);
    WbcController wbc(model, sc_.wbc, sc_.wbc_options, sc_.control);
    auto deliver = [&](const PolicyMessage& msg) {
      if (kind == ControllerKind::Riccati) riccati.set_message(msg);
      else wbc.set_message(msg);
    };
    auto count_bounds = [&](const PolicyMessage& msg) {
      for (const VectorXd& u : msg.us_ff) {
        for (Eigen::Index j = 0; j < u.size(); ++j) {
          res.metrics.solver_torque_violations += (u[j] > hi[j] + 1e-12) + (u[j] < lo[j] - 1e-12);
        }
      }
    };
    auto record_solver = [&](double t, const PolicyMessage& msg) {
      const auto& d = msg.diagnostics;
      res.solver.push_back({t, d.status, d.iterations, d.cost, d.gap, d.degraded});
      count_bounds(msg);
      for (const VectorXd& u : msg.us_ff) {
        if (!u.allFinite()) throw SolverFailure("MPC produced non-finite controls at t=" + std::to_string(t));
      }
    };

    PolicyMessage first;
    try {
      first = mpc.initialize(measure(x0), 0.0);
    } catch (const InvalidConfig&) {
      throw;
    } catch (const Error& e) {
      throw SolverFailure(std::string("initial MPC solve failed: ") + e.what());
    }
    record_solver(0.0, first);
    deliver(first);
    std::deque<std::pair<double, PolicyMessage>> pending;
    std::vector<Disturbance> pushes = sc_.disturbances;
    std::stable_sort(pushes.begin(), pushes.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
    VectorXd u_prev = first.us_ff.front();
    VectorXd x_ref = x0, lambda_ref = VectorXd::Zero(2 * nc);
    std::vector<int> planned(nc, 1);

    for (int k = 0; k < ticks; ++k) {
      const double t = k * dt;
      if (k + lead > 0 && (k + lead) % every == 0) {
        const PolicyMessage msg = mpc.step(measure(plant.state()), t + sc_.mpc.expected_delay, &u_prev);
        record_solver(t, msg);
        pending.push_back({t + sc_.sim.latency, msg});
      }
      while (!pending.empty() && pending.front().first <= t + 1e-9) {
        deliver(pending.front().second);
        pending.pop_front();
      }
      plant.clear_external_force();
      for (const Disturbance& d : pushes) {
        const int body = model.body_index(d.body);
        if (d.duration == 0.0) {
          if (d.time >= t - 1e-12 && d.time < t + dt - 1e-12) plant.push(body, d.impulse, t);
        } else if (t >= d.time - 1e-12 && t < d.time + d.duration - 1e-12) {
          plant.set_external_force(body, d.impulse / d.duration);
        }
      }
      const VectorXd x = plant.state();
      const ControlOutput out = kind == ControllerKind::Riccati ? riccati.control(measure(x), t)
                                                                : wbc.control(measure(x), t);
      const PolicyReference& ref = kind == ControllerKind::Riccati ? riccati.reference() : wbc.reference();
      if (ref.valid(t)) {
        const auto [i, j] = ref.locate(t);
        const ReferenceSample& s = ref.sample(i, j);
        x_ref = s.x;
        lambda_ref.setZero();
        std::fill(planned.begin(), planned.end(), 0);
        const auto& frames = ref.message().contacts[i];
        for (std::size_t c = 0; c < frames.size(); ++c) {
          lambda_ref.segment<2>(2 * frames[c]) = s.forces.segment<2>(2 * c);
          planned[frames[c]] = 1;
        }
      }
      const VectorXd u = out.u;
      const VectorXd lambda = plant.resolve(u, t);

      TickRecord rec;
      rec.t = t;
      rec.u_cmd = u;
      rec.u_meas = u.cwiseMax(lo).cwiseMin(hi);
      rec.x = x;
      rec.x_ref = x_ref;
      const CentroidalQuantities c = centroidal(model, x.head(model.nq()), x.tail(model.nv()));
      const CentroidalQuantities cr = centroidal(model, x_ref.head(model.nq()), x_ref.tail(model.nv()));
      rec.k = c.angular_momentum;
      rec.k_ref = cr.angular_momentum;
      rec.com = c.com;
      rec.com_ref = cr.com;
      rec.lambda = lambda;
      rec.lambda_ref = lambda_ref;
      for (const auto& f : plant.feet()) rec.contact.push_back(f.contact ? 1 : 0);
      rec.planned = planned;
      rec.degraded = out.degraded;
      rec.fallback = out.fallback;
      const VectorXd applied = rec.u_meas;
      res.ticks.push_back(std::move(rec));

      plant.step(applied, t, dt);
      u_prev = applied;
      const VectorXd xn = plant.state();
      if (!xn.allFinite()) {
        res.aborted = true;
        std::ostringstream dump;
        dump << "non-finite state after t=" << t << "\nstate before: " << x.transpose() << "\ntorque: " << u.transpose()
             << "\nstate after: " << xn.transpose() << "\n";
        res.abort_dump = dump.str();
        break;
      }
    }
    res.events = plant.events();
    const int solver_violations = res.metrics.solver_torque_violations;
    res.metrics = compute_metrics(model, sc_, sched, res);
    res.metrics.solver_torque_violations = solver_violations;
    res.checks = evaluate_checks(sc_, res);
    res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return res;
  }

private:
  const RobotModel* model_;
  Scenario sc_;
};

/// Loads the scenario's model and runs it with its configured controller
/// (or `kind` when given).
inline SimResult simulate(const Scenario& sc, std::optional<ControllerKind> kind = std::nullopt) {
  const RobotModel model = load_model(sc.model_path);
  Simulation sim(model, sc);
  return sim.run(kind.value_or(sc.controller));
}

}  // namespace fbmpc
