#pragma once

#include "fbmpc/mpc/policy.hpp"

namespace fbmpc {

struct ControlOptions {
  double control_dt = 0.0025;
  /// velocity-only contact stabilization shared by the rollout and the WBC
  double baumgarte_freq = 20.0;
  double baumgarte_damping = 1.0;

  void validate() const {
    if (!(control_dt > 0.0)) throw InvalidConfig("control dt must be > 0");
    if (baumgarte_freq < 0.0 || baumgarte_damping < 0.0) throw InvalidConfig("Baumgarte gains must be >= 0");
  }
};

/// Reference state at a control tick with the acceleration and contact
/// forces that produced it.
struct ReferenceSample {
  VectorXd x;
  VectorXd acc;
  VectorXd forces;
};

inline ContactSet control_contacts(const std::vector<int>& frames, const ControlOptions& opt) {
  ContactSet cs;
  cs.frames = frames;
  cs.baumgarte_freq = opt.baumgarte_freq;
  cs.baumgarte_damping = opt.baumgarte_damping;
  return cs;
}

/// Contact-consistent forward simulation of the feed-forward policy: every
/// running node is refined into dt/h control ticks starting from its
/// reference state, x_{j+1} = f(x_j, u_ff, h).
class PolicyReference {
public:
  explicit PolicyReference(const RobotModel& model, ControlOptions opt = {})
      : model_(&model), state_(model), opt_(opt) {
    opt_.validate();
  }

  void set(const PolicyMessage& msg) {
    msg.validate();
    if (msg.empty()) throw InvalidConfig("empty policy message");
    msg_ = msg;
    samples_.assign(msg.kinds.size(), {});
    const int nq = model_->nq();
    for (int i = 0; i < msg.size(); ++i) {
      if (msg.kinds[i] != NodeKind::Running) continue;
      const int n = std::max(1, static_cast<int>(std::lround(msg.dts[i] / opt_.control_dt)));
      const double h = msg.dts[i] / n;
      const ContactSet cs = control_contacts(msg.contacts[i], opt_);
      VectorXd x = msg.xs_ref[i];
      for (int j = 0; j < n; ++j) {
        const VectorXd q = x.head(nq), v = x.tail(model_->nv());
        const ContactSolution sol = contact_forward_dynamics(*model_, q, v, msg.us_ff[i], cs);
        samples_[i].push_back({x, sol.acceleration, sol.forces});
        const VectorXd v1 = v + h * sol.acceleration;
        x << state_.integrate_velocity(q, v1, h), v1;
      }
    }
  }

  bool has_message() const { return !msg_.empty(); }
  const PolicyMessage& message() const { return msg_; }

  /// Whether t falls inside the message window [first node, last node).
  bool valid(double t) const {
    return has_message() && t >= msg_.node_times.front() - 1e-9 && t < msg_.node_times.back() - 1e-9;
  }

  /// Running node and tick index covering t (floored to the last completed tick).
  std::pair<int, int> locate(double t) const {
    const int i = msg_.node_at(t);
    const int n = static_cast<int>(samples_[i].size());
    const double h = msg_.dts[i] / n;
    const int j = std::clamp(static_cast<int>(std::floor((t - msg_.node_times[i]) / h + 1e-9)), 0, n - 1);
    return {i, j};
  }

  const ReferenceSample& sample(int node, int tick) const { return samples_[node][tick]; }
  const MultibodyStateSpace& state() const { return state_; }
  const ControlOptions& options() const { return opt_; }

private:
  const RobotModel* model_;
  MultibodyStateSpace state_;
  ControlOptions opt_;
  PolicyMessage msg_;
  std::vector<std::vector<ReferenceSample>> samples_;
};

/// One controller tick.
struct ControlOutput {
  VectorXd u;
  VectorXd q_ref, v_ref;  ///< joint references
  int node = -1;
  bool degraded = false;  ///< stale message: previous command held
  bool masked = false;    ///< base feedback columns removed
  bool flight = false;    ///< WBC flight-phase PD path
  bool fallback = false;  ///< WBC first stage infeasible: clamped previous torques
};

}  // namespace fbmpc
