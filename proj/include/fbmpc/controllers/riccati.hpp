#pragma once

#include "fbmpc/controllers/reference.hpp"

namespace fbmpc {

/// Gain with the base position and base velocity columns zeroed when fewer
/// than two contacts are active.
inline MatrixXd masked_gain(const MatrixXd& K, int nv, int active_contacts) {
  if (active_contacts >= 2) return K;
  MatrixXd out = K;
  out.middleCols(0, 3).setZero();
  out.middleCols(nv, 3).setZero();
  return out;
}

/// State feedback u = clamp(u_ff + K (x* (-) x)) around the rollout-interpolated
/// reference x* of the active policy.
class RiccatiController {
public:
  explicit RiccatiController(const RobotModel& model, ControlOptions opt = {})
      : model_(&model), ref_(model, opt), lo_(model.torque_lower()), hi_(model.torque_upper()) {}

  void set_message(const PolicyMessage& msg) { ref_.set(msg); }
  const PolicyReference& reference() const { return ref_; }

  ControlOutput control(const VectorXd& x, double t) {
    check_dim(x.size(), model_->nx(), "state");
    if (!ref_.has_message()) throw InvalidConfig("controller has no policy message");
    if (!ref_.valid(t)) {
      ControlOutput held = last_;
      if (held.u.size() == 0) held.u = VectorXd::Zero(model_->nu());
      held.degraded = true;
      return held;
    }
    const auto [i, j] = ref_.locate(t);
    const PolicyMessage& msg = ref_.message();
    const VectorXd& xs = ref_.sample(i, j).x;
    const int nv = model_->nv();
    ControlOutput out;
    out.node = i;
    out.masked = msg.contacts[i].size() < 2;
    const MatrixXd K = masked_gain(msg.K_gains[i], nv, static_cast<int>(msg.contacts[i].size()));
    const VectorXd dx = ref_.state().difference(xs, x);
    out.u = (msg.us_ff[i] + K * dx).cwiseMax(lo_).cwiseMin(hi_);
    out.q_ref = xs.segment(3, model_->nu());
    out.v_ref = xs.segment(nv + 3, model_->nu());
    last_ = out;
    return out;
  }

private:
  const RobotModel* model_;
  PolicyReference ref_;
  VectorXd lo_, hi_;
  ControlOutput last_;
};

/// One-shot evaluation of the Riccati policy.
inline ControlOutput riccati_control(const RobotModel& model, const PolicyMessage& msg, const VectorXd& x, double t,
                                     const ControlOptions& opt = {}) {
  RiccatiController c(model, opt);
  c.set_message(msg);
  return c.control(x, t);
}

}  // namespace fbmpc
