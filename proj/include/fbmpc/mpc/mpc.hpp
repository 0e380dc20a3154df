#pragma once

#include <map>

#include "fbmpc/mpc/policy.hpp"
#include "fbmpc/mpc/quasi_static.hpp"

namespace fbmpc {

struct MpcConfig {
  double horizon = 1.25;
  double node_dt = 0.01;
  double update_rate = 50.0;
  int control_horizon_nodes = 4;
  double expected_delay = 0.0025;
  int iterations_per_step = 1;
  int initial_iterations = 100;

  int nodes() const { return static_cast<int>(std::lround(horizon / node_dt)); }

  void validate() const {
    if (!(node_dt > 0.0) || !(horizon > 0.0)) throw InvalidConfig("MPC horizon and node dt must be > 0");
    if (std::abs(horizon / node_dt - nodes()) > 1e-9 * std::max(1.0, horizon / node_dt)) {
      throw InvalidConfig("MPC horizon must be an integer number of nodes");
    }
    if (!(update_rate > 0.0)) throw InvalidConfig("MPC update rate must be > 0");
    if (control_horizon_nodes < 1 || control_horizon_nodes > nodes()) {
      throw InvalidConfig("control horizon must cover between 1 and N nodes");
    }
    if (expected_delay < 0.0) throw InvalidConfig("expected delay must be >= 0");
    if (iterations_per_step < 1 || initial_iterations < 0) throw InvalidConfig("MPC iteration counts are invalid");
  }
};

/// x0 advanced by `delay` under constant torques u0 with the given contacts
/// (semi-implicit Euler, sub-steps of at most `max_step`).
inline VectorXd predict_initial_state(const RobotModel& model, const VectorXd& x0, const VectorXd& u0,
                                      const ContactSet& contacts, double delay, double max_step = 1e-3) {
  check_dim(x0.size(), model.nx(), "state");
  check_dim(u0.size(), model.nu(), "control");
  if (delay < 0.0) throw InvalidConfig("delay must be >= 0");
  if (delay == 0.0) return x0;
  const int steps = std::max(1, static_cast<int>(std::ceil(delay / max_step - 1e-12)));
  const double h = delay / steps;
  const MultibodyStateSpace S(model);
  VectorXd q = x0.head(model.nq()), v = x0.tail(model.nv());
  for (int i = 0; i < steps; ++i) {
    const ContactSolution sol = contact_forward_dynamics(model, q, v, u0, contacts);
    v += h * sol.acceleration;
    q = S.integrate_velocity(q, v, h);
  }
  VectorXd out(model.nx());
  out << q, v;
  return out;
}

/// Receding-horizon loop: shift, re-reference, delay-compensate, iterate.
class Mpc {
public:
  Mpc(const RobotModel& model, ContactSchedule schedule, CostWeights weights, MpcConfig config,
      ProblemOptions problem_options = {}, SolverOptions solver_options = {})
      : config_(config), popt_(problem_options), schedule_(std::move(schedule)) {
    config_.validate();
    ctx_ = make_context(model, std::move(weights), popt_);
    sopt_ = solver_options;
    origin_ = schedule_.start_time;
  }

  const MpcConfig& config() const { return config_; }
  const RobotModel& model() const { return *ctx_->model; }
  const LeggedContext& context() const { return *ctx_; }
  const ContactSchedule& schedule() const { return schedule_; }
  ShootingProblem& problem() { return *problem_; }
  BoxFDDP& solver() { return *solver_; }
  const std::vector<NodeSpec>& specs() const { return specs_; }
  /// Absolute time of node 0 of the current problem.
  double start_time() const { return origin_ + first_node_ * config_.node_dt; }
  int first_node() const { return first_node_; }
  const PolicyMessage& last_message() const { return last_; }

  /// Builds the node pool and solves the first problem from x0 (quasi-static
  /// controls, x0 at every node) for `initial_iterations`.
  PolicyMessage initialize(const VectorXd& x0, double t0) {
    check_dim(x0.size(), model().nx(), "initial state");
    first_node_ = node_index(t0);
    const int N = config_.nodes();
    LeggedProblem lp = build_problem(ctx_, schedule_, x0, N, config_.node_dt, origin_, popt_, first_node_);
    specs_ = std::move(lp.specs);
    problem_ = std::move(lp.problem);
    // spare nodes: at most one impulse per running node
    for (int i = problem_->capacity(); i < 2 * N; ++i) {
      NodeSpec spare = specs_.front();
      spare.kind = NodeKind::Running;
      spare.dt = config_.node_dt;
      problem_->add_spare(std::make_shared<LeggedAction>(ctx_, spare));
    }
    solver_ = std::make_unique<BoxFDDP>(*problem_, sopt_);
    std::vector<VectorXd> xs(problem_->size() + 1, x0), us(problem_->size());
    for (int i = 0; i < problem_->size(); ++i) us[i] = quasi_static_guess(i);
    solver_->set_candidate(xs, us);
    SolverStatus st = SolverStatus::Iterating;
    int calls = 0;
    while (calls < config_.initial_iterations) {
      st = solver_->iterate();
      ++calls;
      if (st == SolverStatus::Converged || st == SolverStatus::NoStepAccepted) break;
    }
    allocations_after_init_ = node_allocation_counter().load();
    last_ = make_message(t0, st, calls, 0, false);
    initialized_ = true;
    return last_;
  }

  /// Replaces the contact schedule; every node reference is rebuilt at the next step.
  void set_schedule(ContactSchedule s) {
    s.validate();
    schedule_ = std::move(s);
    schedule_changed_ = true;
  }

  /// Shifts to the node containing wall_time, re-references the nodes and
  /// sets the delay-compensated initial state, without iterating. Returns the
  /// number of nodes whose references changed.
  int prepare(const VectorXd& x_meas, double wall_time, const VectorXd* u_applied = nullptr) {
    if (!initialized_) throw InvalidConfig("MPC used before initialize()");
    check_dim(x_meas.size(), model().nx(), "measured state");
    const int idx = std::max(first_node_, node_index(wall_time));
    const int elapsed = idx - first_node_;
    const int n_old = problem_->size();

    // leading nodes to drop: `elapsed` running nodes and the impulse nodes directly behind them
    int drop = 0;
    for (int r = 0; drop < n_old && r < elapsed; ++drop) r += specs_[drop].kind == NodeKind::Running;
    while (elapsed > 0 && drop < n_old && specs_[drop].kind == NodeKind::Impulse) ++drop;

    const std::vector<VectorXd> xs_old = solver_->xs(), us_old = solver_->us();
    std::vector<NodeSpec> next = plan_nodes(schedule_, config_.nodes(), config_.node_dt, origin_, popt_, idx);
    const int n_new = static_cast<int>(next.size()) - 1;
    if (n_new > problem_->capacity()) throw InvalidConfig("horizon needs more nodes than the preallocated pool");

    problem_->rotate_left(drop);
    problem_->resize(n_new);
    int updated = 0;
    for (int i = 0; i < n_new; ++i) {
      auto& node = static_cast<LeggedAction&>(problem_->running_mut(i));
      if (schedule_changed_ || !(node.spec() == next[i])) {
        node.set_spec(next[i]);
        ++updated;
      }
    }
    static_cast<LeggedAction&>(problem_->terminal_mut()).set_spec(next.back());
    specs_ = std::move(next);
    schedule_changed_ = false;
    first_node_ = idx;

    // warm start: shifted trajectories, last state and quasi-static controls for the new tail
    std::vector<VectorXd> xs(n_new + 1), us(n_new);
    for (int i = 0; i <= n_new; ++i) xs[i] = i + drop <= n_old ? xs_old[i + drop] : xs_old.back();
    for (int i = 0; i < n_new; ++i) {
      const int j = i + drop;
      const bool same = j < n_old && us_old[j].size() == problem_->running(i).nu();
      us[i] = same ? us_old[j] : quasi_static_guess(i);
    }

    // delay compensation with the torques applied in the meantime
    VectorXd u0;
    if (u_applied) u0 = *u_applied;
    else if (!last_.empty()) u0 = last_.us_ff[last_.node_at(wall_time)];
    if (u0.size() != model().nu()) u0 = quasi_static_guess(0);
    ContactSet now = specs_.front().contacts;
    now.anchors.clear();
    problem_->set_x0(predict_initial_state(model(), x_meas, u0, now, config_.expected_delay));
    solver_->allocate();
    solver_->set_candidate(xs, us);
    return updated;
  }

  /// One MPC update: prepare(), then iterations_per_step solver iterations.
  /// On NoStepAccepted the previous policy is re-stamped and flagged degraded.
  PolicyMessage step(const VectorXd& x_meas, double wall_time, const VectorXd* u_applied = nullptr) {
    const int updated = prepare(x_meas, wall_time, u_applied);
    SolverStatus st = SolverStatus::Iterating;
    int calls = 0;
    while (calls < config_.iterations_per_step) {
      st = solver_->iterate();
      ++calls;
      if (st == SolverStatus::Converged || st == SolverStatus::NoStepAccepted) break;
    }
    if (st == SolverStatus::NoStepAccepted) {
      PolicyMessage m = last_;
      m.stamp = wall_time;
      m.diagnostics.degraded = true;
      m.diagnostics.status = to_string(st);
      m.diagnostics.updated_nodes = updated;
      solver_->set_mu(sopt_.mu_init);
      last_ = m;
      return m;
    }
    last_ = make_message(wall_time, st, calls, updated, false);
    return last_;
  }

  /// Node workspaces created since initialize() finished (0 in steady operation).
  long allocations_since_init() const { return node_allocation_counter().load() - allocations_after_init_; }

  /// Cached quasi-static solution for a contact set at the reference posture.
  const QuasiStatic& quasi_static(const std::vector<int>& frames) {
    auto it = qs_cache_.find(frames);
    if (it == qs_cache_.end()) {
      it = qs_cache_.emplace(frames, quasi_static_start(model(), ctx_->weights.q_ref, frames)).first;
    }
    return it->second;
  }

private:
  int node_index(double t) const {
    return static_cast<int>(std::floor((t - origin_) / config_.node_dt + 1e-9));
  }

  VectorXd quasi_static_guess(int node) {
    const ActionModel& m = problem_->running(node);
    if (m.nu() == 0) return VectorXd();
    const std::vector<int>& frames = static_cast<const LeggedAction&>(m).spec().contacts.frames;
    if (frames.empty()) return VectorXd::Zero(m.nu());
    try {
      return quasi_static(frames).u.cwiseMax(m.u_lower).cwiseMin(m.u_upper);
    } catch (const RankDeficientContacts&) {
      return VectorXd::Zero(m.nu());
    }
  }

  PolicyMessage make_message(double stamp, SolverStatus st, int iterations, int updated, bool degraded) {
    // node workspaces hold the last trial after a rejected line search
    if (!solver_->workspaces_current()) problem_->calc(solver_->xs(), solver_->us());
    PolicyMessage m;
    m.stamp = stamp;
    int running = 0;
    for (int i = 0; i < problem_->size() && running < config_.control_horizon_nodes; ++i) {
      const NodeSpec& s = specs_[i];
      const auto& d = static_cast<const LeggedData&>(problem_->data(i));
      m.node_times.push_back(s.time);
      m.kinds.push_back(s.kind);
      m.dts.push_back(s.dt);
      m.xs_ref.push_back(solver_->xs()[i]);
      m.us_ff.push_back(solver_->us()[i]);
      // solver gains act on x (-) x*; the message carries the x* (-) x form
      m.K_gains.push_back(-solver_->policy().K[i]);
      m.forces.push_back(d.lambda);
      m.contacts.push_back(s.contacts.frames);
      running += s.kind == NodeKind::Running;
    }
    const int n = m.size();
    m.node_times.push_back(specs_[n].time);
    m.xs_ref.push_back(solver_->xs()[n]);
    m.diagnostics.status = to_string(st);
    m.diagnostics.iterations = iterations;
    m.diagnostics.cost = solver_->cost();
    m.diagnostics.gap = solver_->gap_norm();
    m.diagnostics.mu = solver_->mu();
    m.diagnostics.qu_norm = solver_->qu_norm();
    m.diagnostics.degraded = degraded;
    m.diagnostics.updated_nodes = updated;
    return m;
  }

  MpcConfig config_;
  ProblemOptions popt_;
  SolverOptions sopt_;
  ContactSchedule schedule_;
  std::shared_ptr<const LeggedContext> ctx_;
  std::vector<NodeSpec> specs_;
  std::unique_ptr<ShootingProblem> problem_;
  std::unique_ptr<BoxFDDP> solver_;
  std::map<std::vector<int>, QuasiStatic> qs_cache_;
  PolicyMessage last_;
  double origin_ = 0.0;
  int first_node_ = 0;
  long allocations_after_init_ = 0;
  bool schedule_changed_ = false;
  bool initialized_ = false;
};

}  // namespace fbmpc
