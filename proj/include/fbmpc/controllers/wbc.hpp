#pragma once

#include "fbmpc/controllers/hqp.hpp"
#include "fbmpc/controllers/reference.hpp"
#include "fbmpc/multibody/centroidal.hpp"
#include "fbmpc/ocp/costs.hpp"

namespace fbmpc {

struct WbcGains {
  double K_e = 60.0, D_e = 90.0;     ///< CoM task
  double K_sw = 350.0, D_sw = 25.0;  ///< swing-foot task
  double K_l = 30.0, D_l = 10.0;     ///< linear momentum
  double D_k = 10.0;                 ///< angular momentum
  double Kp_flight = 40.0, Kd_flight = 1.0;  ///< joint PD during flight [N m/rad, N m s/rad]

  void validate() const {
    for (double g : {K_e, D_e, K_sw, D_sw, K_l, D_l, D_k, Kp_flight, Kd_flight}) {
      if (!(g >= 0.0)) throw InvalidConfig("WBC gains must be >= 0");
    }
  }
};

struct WbcOptions {
  FrictionCone cone{};
  bool momentum_task = true;
  bool force_task = true;
  HqpOptions hqp{1e-10, 1e-10, 1e-6, 1e-12, 1000};
};

/// u = clamp(u_ff + Kp (q_j* - q_j) + Kd (v_j* - v_j)).
inline VectorXd flight_pd(const RobotModel& model, const VectorXd& x_ref, const VectorXd& u_ff, const VectorXd& x,
                          const WbcGains& gains) {
  const int nu = model.nu(), nv = model.nv();
  check_dim(x.size(), model.nx(), "state");
  check_dim(x_ref.size(), model.nx(), "reference state");
  check_dim(u_ff.size(), nu, "feed-forward torque");
  const VectorXd u = u_ff + gains.Kp_flight * (x_ref.segment(3, nu) - x.segment(3, nu)) +
                     gains.Kd_flight * (x_ref.segment(nv + 3, nu) - x.segment(nv + 3, nu));
  return u.cwiseMax(model.torque_lower()).cwiseMin(model.torque_upper());
}

/// Task stack over y = (vdot, u, lambda) for one control tick.
struct WbcProblem {
  std::vector<HqpTask> tasks;
  HqpInequalities inequalities;
  Vector3d momentum_rate_command = Vector3d::Zero();  ///< (kdot, ldot_x, ldot_y)
};

/// Builds dynamics, swing, CoM, momentum and contact-force stages (in that
/// priority) around the reference sample.
inline WbcProblem build_wbc_problem(const RobotModel& model, const VectorXd& x, const ReferenceSample& ref,
                                    const std::vector<int>& contacts, const WbcGains& g, const WbcOptions& wopt,
                                    const ControlOptions& copt) {
  const int nv = model.nv(), nu = model.nu(), nq = model.nq();
  const int nf = 2 * static_cast<int>(contacts.size());
  const int n = nv + nu + nf;
  const VectorXd q = x.head(nq), v = x.tail(nv);
  const VectorXd qd = ref.x.head(nq), vd = ref.x.tail(nv);
  WbcProblem p;

  // contact dynamics
  {
    const MatrixXd M = mass_matrix(model, q);
    const MatrixXd J = contact_jacobian(model, q, contacts);
    HqpTask t{"dynamics", MatrixXd::Zero(nv + nf, n), VectorXd(nv + nf)};
    t.A.topLeftCorner(nv, nv) = M;
    t.A.block(0, nv, nv, nu) = -model.actuation_matrix();
    if (nf > 0) {
      t.A.block(0, nv + nu, nv, nf) = -J.transpose();
      t.A.bottomLeftCorner(nf, nv) = J;
    }
    t.a.head(nv) = -nonlinear_effects(model, q, v);
    if (nf > 0) {
      t.a.tail(nf) = -frame_acceleration_bias(model, q, v, contacts) -
                     baumgarte_term(model, q, v, control_contacts(contacts, copt));
    }
    p.tasks.push_back(std::move(t));
  }

  // torque limits and friction cones
  {
    const ConeMatrices cone = cone_matrices(wopt.cone);
    const int rows = nu + 3 * static_cast<int>(contacts.size());
    HqpInequalities& in = p.inequalities;
    in.B = MatrixXd::Zero(rows, n);
    in.lower.resize(rows);
    in.upper.resize(rows);
    in.B.block(0, nv, nu, nu).setIdentity();
    in.lower.head(nu) = model.torque_lower();
    in.upper.head(nu) = model.torque_upper();
    for (std::size_t c = 0; c < contacts.size(); ++c) {
      const int r = nu + 3 * static_cast<int>(c);
      in.B.block(r, nv + nu + 2 * static_cast<int>(c), 3, 2) = cone.C;
      in.lower.segment<3>(r) = cone.c;
      in.upper.segment<3>(r).setConstant(std::numeric_limits<double>::infinity());
    }
  }

  // swing feet
  std::vector<int> swing;
  for (int f = 0; f < static_cast<int>(model.contacts.size()); ++f) {
    if (std::find(contacts.begin(), contacts.end(), f) == contacts.end()) swing.push_back(f);
  }
  if (!swing.empty()) {
    const int m = 2 * static_cast<int>(swing.size());
    const MatrixXd J = contact_jacobian(model, q, swing);
    const MatrixXd Jd = contact_jacobian(model, qd, swing);
    const VectorXd acc_d = Jd * ref.acc + frame_acceleration_bias(model, qd, vd, swing);
    HqpTask t{"swing", MatrixXd::Zero(m, n), VectorXd(m)};
    t.A.leftCols(nv) = J;
    t.a = acc_d - frame_acceleration_bias(model, q, v, swing);
    for (std::size_t s = 0; s < swing.size(); ++s) {
      const int f = swing[s];
      const Vector2d e = frame_position(model, qd, f) - frame_position(model, q, f);
      const Vector2d de = frame_velocity(model, qd, vd, f) - frame_velocity(model, q, v, f);
      t.a.segment<2>(2 * s) += g.K_sw * e + g.D_sw * de;
    }
    p.tasks.push_back(std::move(t));
  }

  const CentroidalQuantities c = centroidal(model, q, v);
  const CentroidalQuantities cd = centroidal(model, qd, vd);
  const Vector3d drift = centroidal_momentum_drift(model, q, v);
  const Vector3d hdot_d = cd.centroidal_matrix * ref.acc + centroidal_momentum_drift(model, qd, vd);
  const double mass = c.total_mass;

  // CoM
  {
    HqpTask t{"com", MatrixXd::Zero(2, n), VectorXd(2)};
    t.A.leftCols(nv) = c.centroidal_matrix.bottomRows(2) / mass;
    const Vector2d com_acc_d = hdot_d.tail<2>() / mass;
    t.a = com_acc_d + g.K_e * (cd.com - c.com) + g.D_e * (cd.com_velocity - c.com_velocity) - drift.tail<2>() / mass;
    p.tasks.push_back(std::move(t));
  }

  // centroidal momentum
  {
    Vector3d cmd;
    cmd[0] = hdot_d[0] + g.D_k * (cd.angular_momentum - c.angular_momentum);
    cmd.tail<2>() = mass * (hdot_d.tail<2>() / mass + g.K_l * (cd.com - c.com) + g.D_l * (cd.com_velocity - c.com_velocity));
    p.momentum_rate_command = cmd;
    if (wopt.momentum_task) {
      HqpTask t{"momentum", MatrixXd::Zero(3, n), VectorXd(3)};
      t.A.leftCols(nv) = c.centroidal_matrix;
      t.a = cmd - drift;
      p.tasks.push_back(std::move(t));
    }
  }

  // contact forces
  if (wopt.force_task && contacts.size() >= 2) {
    HqpTask t{"forces", MatrixXd::Zero(nf, n), ref.forces};
    t.A.rightCols(nf).setIdentity();
    p.tasks.push_back(std::move(t));
  }
  return p;
}

/// Hierarchical whole-body controller tracking the rollout-interpolated policy.
class WbcController {
public:
  WbcController(const RobotModel& model, WbcGains gains = {}, WbcOptions wopt = {}, ControlOptions copt = {})
      : model_(&model), gains_(gains), wopt_(wopt), ref_(model, copt) {
    gains_.validate();
  }

  void set_message(const PolicyMessage& msg) { ref_.set(msg); }
  const PolicyReference& reference() const { return ref_; }
  const HqpResult& last_solution() const { return last_hqp_; }
  const WbcProblem& last_problem() const { return last_problem_; }

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
    const ReferenceSample& s = ref_.sample(i, j);
    const std::vector<int>& contacts = msg.contacts[i];
    const int nv = model_->nv(), nu = model_->nu();
    ControlOutput out;
    out.node = i;
    out.q_ref = s.x.segment(3, nu);
    out.v_ref = s.x.segment(nv + 3, nu);
    if (contacts.size() < 2) {
      out.flight = true;
      out.u = flight_pd(*model_, s.x, msg.us_ff[i], x, gains_);
    } else {
      try {
        last_problem_ = build_wbc_problem(*model_, x, s, contacts, gains_, wopt_, ref_.options());
        last_hqp_ = hqp_solve(last_problem_.tasks, last_problem_.inequalities, wopt_.hqp);
        out.u = last_hqp_.y.segment(nv, nu).cwiseMax(model_->torque_lower()).cwiseMin(model_->torque_upper());
      } catch (const Stage1Infeasible&) {
        out.fallback = true;
        const VectorXd prev = last_.u.size() ? last_.u : msg.us_ff[i];
        out.u = prev.cwiseMax(model_->torque_lower()).cwiseMin(model_->torque_upper());
      }
    }
    last_ = out;
    return out;
  }

private:
  const RobotModel* model_;
  WbcGains gains_;
  WbcOptions wopt_;
  PolicyReference ref_;
  ControlOutput last_;
  WbcProblem last_problem_;
  HqpResult last_hqp_;
};

inline ControlOutput wbc_control(const RobotModel& model, const PolicyMessage& msg, const VectorXd& x, double t,
                                 const WbcGains& gains = {}, const WbcOptions& wopt = {},
                                 const ControlOptions& copt = {}) {
  WbcController c(model, gains, wopt, copt);
  c.set_message(msg);
  return c.control(x, t);
}

}  // namespace fbmpc
