#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "fbmpc/multibody/algorithms.hpp"

namespace fbmpc {

/// Active point contacts with Baumgarte drift correction. `anchors` (world
/// positions, one per frame) enable the position term; leave empty to
/// stabilize velocity only.
struct ContactSet {
  std::vector<int> frames;
  double baumgarte_freq = 20.0;
  double baumgarte_damping = 1.0;
  std::vector<Vector2d> anchors;

  int size() const { return static_cast<int>(frames.size()); }
  int nf() const { return 2 * size(); }
  bool empty() const { return frames.empty(); }

  void validate(const RobotModel& model) const {
    validate_contacts(model, frames);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      for (std::size_t j = i + 1; j < frames.size(); ++j) {
        if (frames[i] == frames[j]) throw InvalidConfig("duplicate contact frame in contact set");
      }
    }
    if (baumgarte_freq < 0.0 || baumgarte_damping < 0.0) throw InvalidConfig("Baumgarte gains must be >= 0");
    if (!anchors.empty() && anchors.size() != frames.size()) {
      throw InvalidConfig("contact anchors must match the number of frames");
    }
  }
};

/// Factorized pieces of the contact KKT system, kept for the derivative pass.
struct KktFactors {
  MatrixXd M;
  MatrixXd J;
  Eigen::LLT<MatrixXd> M_llt;
  MatrixXd Minv_Jt;  ///< M^-1 J^T
  Eigen::LLT<MatrixXd> Mhat_llt;

  /// Solves [M -J^T; J 0] [y; z] = [b1; b2] blockwise.
  void solve(const MatrixXd& b1, const MatrixXd& b2, MatrixXd& y, MatrixXd& z) const {
    const MatrixXd Minv_b1 = M_llt.solve(b1);
    if (J.rows() == 0) {
      y = Minv_b1;
      z.resize(0, b1.cols());
      return;
    }
    z = Mhat_llt.solve(b2 - J * Minv_b1);
    y = Minv_b1 + Minv_Jt * z;
  }
};

struct ContactSolution {
  VectorXd acceleration;
  VectorXd forces;  ///< world-frame force on the robot, (t_x, t_y) per contact
  double kkt_residual = 0.0;
  KktFactors factors;
};

struct ImpulseSolution {
  VectorXd post_velocity;
  VectorXd impulses;
  double restitution = 0.0;
  double kkt_residual = 0.0;
  KktFactors factors;
};

/// Acceleration/force Jacobians over the tangent state (dq, dv) and control.
struct DynamicsDerivatives {
  MatrixXd fx;  ///< nv x 2nv
  MatrixXd fu;  ///< nv x nu
  MatrixXd lx;  ///< nf x 2nv
  MatrixXd lu;  ///< nf x nu
};

namespace detail {

inline constexpr double kMaxContactCondition = 1e12;

inline KktFactors factorize(MatrixXd M, MatrixXd J) {
  KktFactors k;
  k.M = std::move(M);
  k.J = std::move(J);
  k.M_llt.compute(k.M);
  if (k.M_llt.info() != Eigen::Success) throw InvalidModel("mass matrix is not positive definite");
  if (k.J.rows() > 0) {
    k.Minv_Jt = k.M_llt.solve(k.J.transpose());
    const MatrixXd Mhat = k.J * k.Minv_Jt;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(Mhat, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kMaxContactCondition) {
      throw RankDeficientContacts("contact Jacobian is rank deficient (operational-space inertia condition " +
                                  std::to_string(lo > 0.0 ? hi / lo : INFINITY) + ")");
    }
    k.Mhat_llt.compute(Mhat);
  } else {
    k.Minv_Jt.resize(k.M.rows(), 0);
  }
  return k;
}

template <typename T>
std::vector<T> to_scalar(const VectorXd& x) {
  std::vector<T> out(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = T(x[i]);
  return out;
}

/// Contact acceleration residual J vdot + Jdot v + psi for every frame.
template <typename T>
void contact_acceleration(const RobotModel& model, const ContactSet& contacts, const KinematicsData<T>& data,
                          std::span<T> out) {
  const T w(contacts.baumgarte_freq), z(contacts.baumgarte_damping);
  for (int c = 0; c < contacts.size(); ++c) {
    const int id = contacts.frames[c];
    Vec2<T> r = frame_acceleration(model, data, id) + (T(2.0) * z * w) * frame_velocity(model, data, id);
    if (!contacts.anchors.empty()) {
      r += (w * w) * (frame_position(model, data, id) - Vec2<T>(contacts.anchors[c]));
    }
    out[2 * c] = r.x;
    out[2 * c + 1] = r.y;
  }
}

template <typename T>
std::vector<FrameForce<T>> frame_forces(const ContactSet& contacts, const VectorXd& forces) {
  std::vector<FrameForce<T>> f(contacts.frames.size());
  for (int c = 0; c < contacts.size(); ++c) f[c] = {contacts.frames[c], {T(forces[2 * c]), T(forces[2 * c + 1])}};
  return f;
}

}  // namespace detail

/// Baumgarte term psi(q, v) stacked over the contact set.
inline VectorXd baumgarte_term(const RobotModel& model, const VectorXd& q, const VectorXd& v,
                               const ContactSet& contacts) {
  const KinematicsData<double> data = kinematics(model, q, v);
  VectorXd psi(contacts.nf());
  const double w = contacts.baumgarte_freq, z = contacts.baumgarte_damping;
  for (int c = 0; c < contacts.size(); ++c) {
    const int id = contacts.frames[c];
    Vector2d r = 2.0 * z * w * to_eigen(frame_velocity(model, data, id));
    if (!contacts.anchors.empty()) r += w * w * (to_eigen(frame_position(model, data, id)) - contacts.anchors[c]);
    psi.segment<2>(2 * c) = r;
  }
  return psi;
}

/// Rigid contact forward dynamics:
///   M vdot = S u - h + tau_ext + J^T lambda,   J vdot + Jdot v + psi = 0,
/// solved through the operational-space inertia Mhat = J M^-1 J^T.
/// tau_ext (optional, nv) is an external generalized force.
inline ContactSolution contact_forward_dynamics(const RobotModel& model, const VectorXd& q, const VectorXd& v,
                                                const VectorXd& u, const ContactSet& contacts,
                                                const VectorXd& tau_ext = VectorXd()) {
  check_dim(q.size(), model.nq(), "configuration");
  check_dim(v.size(), model.nv(), "velocity");
  check_dim(u.size(), model.nu(), "control");
  if (tau_ext.size()) check_dim(tau_ext.size(), model.nv(), "external force");
  contacts.validate(model);
  ContactSolution sol;
  sol.factors = detail::factorize(mass_matrix(model, q), contact_jacobian(model, q, contacts.frames));
  VectorXd tau_b = model.actuation_matrix() * u - nonlinear_effects(model, q, v);
  if (tau_ext.size()) tau_b += tau_ext;
  VectorXd a_c(contacts.nf());
  if (!contacts.empty()) a_c = frame_acceleration_bias(model, q, v, contacts.frames) + baumgarte_term(model, q, v, contacts);
  MatrixXd y, z;
  sol.factors.solve(tau_b, -a_c, y, z);
  sol.acceleration = y.col(0);
  sol.forces = z.col(0);
  const VectorXd r1 = sol.factors.M * sol.acceleration - sol.factors.J.transpose() * sol.forces - tau_b;
  const VectorXd r2 = sol.factors.J * sol.acceleration + a_c;
  sol.kkt_residual = std::max(inf_norm(r1), inf_norm(r2));
  return sol;
}

/// Impulse dynamics at a contact-gain instant:
///   M (v+ - v-) = J^T Lambda,   J v+ = -e J v-.
/// e = 0 leaves the new contacts at rest.
inline ImpulseSolution impulse_dynamics(const RobotModel& model, const VectorXd& q, const VectorXd& v_minus,
                                        const ContactSet& contacts, double restitution = 0.0) {
  check_dim(q.size(), model.nq(), "configuration");
  check_dim(v_minus.size(), model.nv(), "velocity");
  if (restitution < 0.0 || restitution > 1.0) throw InvalidConfig("restitution must lie in [0, 1]");
  contacts.validate(model);
  ImpulseSolution sol;
  sol.restitution = restitution;
  sol.factors = detail::factorize(mass_matrix(model, q), contact_jacobian(model, q, contacts.frames));
  const VectorXd tau_i = sol.factors.M * v_minus;
  const VectorXd target = -restitution * (sol.factors.J * v_minus);
  MatrixXd y, z;
  sol.factors.solve(tau_i, target, y, z);
  sol.post_velocity = y.col(0);
  sol.impulses = z.col(0);
  const VectorXd r1 = sol.factors.M * (sol.post_velocity - v_minus) - sol.factors.J.transpose() * sol.impulses;
  const VectorXd r2 = sol.factors.J * sol.post_velocity - target;
  sol.kkt_residual = std::max(inf_norm(r1), inf_norm(r2));
  return sol;
}

/// Analytical derivatives of contact_forward_dynamics. The inner partials of
/// the inverse-dynamics and contact-acceleration residuals are exact (dual
/// numbers); the outer chain rule goes through the stored factorization.
inline DynamicsDerivatives contact_dynamics_derivatives(const RobotModel& model, const VectorXd& q,
                                                        const VectorXd& v, const VectorXd& u,
                                                        const ContactSet& contacts, const ContactSolution& sol) {
  (void)u;
  const int nv = model.nv(), nf = contacts.nf();
  const auto a = detail::to_scalar<Dual>(sol.acceleration);
  const auto fext = detail::frame_forces<Dual>(contacts, sol.forces);
  // d/dx of rnea(q, v, vdot, lambda) at fixed vdot, lambda
  const MatrixXd dtau = dual_jacobian(q, v, nv, [&](const std::vector<Dual>& qd, const std::vector<Dual>& vd,
                                                    std::vector<Dual>& out) {
    KinematicsData<Dual> data;
    rnea<Dual>(model, qd, vd, a, fext, true, out, data);
  });
  MatrixXd dacc(nf, 2 * nv);
  if (nf > 0) {
    dacc = dual_jacobian(q, v, nf, [&](const std::vector<Dual>& qd, const std::vector<Dual>& vd,
                                       std::vector<Dual>& out) {
      KinematicsData<Dual> data;
      forward_kinematics<Dual>(model, qd, vd, a, data);
      detail::contact_acceleration<Dual>(model, contacts, data, out);
    });
  }
  DynamicsDerivatives d;
  MatrixXd y, z;
  sol.factors.solve(-dtau, -dacc, y, z);
  d.fx = y;
  d.lx = z;
  const MatrixXd S = model.actuation_matrix();
  sol.factors.solve(S, MatrixXd::Zero(nf, model.nu()), y, z);
  d.fu = y;
  d.lu = z;
  return d;
}

/// Analytical derivatives of impulse_dynamics with respect to (q, v-).
/// fx holds d v+ / d x, lx holds d Lambda / d x; control blocks are zero.
inline DynamicsDerivatives impulse_dynamics_derivatives(const RobotModel& model, const VectorXd& q,
                                                        const VectorXd& v_minus, const ContactSet& contacts,
                                                        const ImpulseSolution& sol) {
  const int nv = model.nv(), nf = contacts.nf();
  const double e = sol.restitution;
  const auto dv = detail::to_scalar<Dual>(VectorXd(sol.post_velocity - v_minus));
  const auto fext = detail::frame_forces<Dual>(contacts, sol.impulses);
  const std::vector<Dual> zero(static_cast<std::size_t>(nv), Dual(0.0));
  // residual r1 = M(q) (v+ - v-) - J^T Lambda, i.e. rnea(q, 0, v+ - v-, Lambda) without gravity
  MatrixXd dr1 = dual_jacobian(q, v_minus, nv, [&](const std::vector<Dual>& qd, const std::vector<Dual>&,
                                                   std::vector<Dual>& out) {
    KinematicsData<Dual> data;
    rnea<Dual>(model, qd, zero, dv, fext, false, out, data);
  }, true, false);
  dr1.rightCols(nv) = -sol.factors.M;
  // residual r2 = J(q) (v+ + e v-)
  MatrixXd dr2(nf, 2 * nv);
  if (nf > 0) {
    const VectorXd w = sol.post_velocity + e * v_minus;
    dr2 = dual_jacobian(q, w, nf, [&](const std::vector<Dual>& qd, const std::vector<Dual>& vd,
                                      std::vector<Dual>& out) {
      KinematicsData<Dual> data;
      forward_kinematics<Dual>(model, qd, vd, zero, data);
      for (int c = 0; c < contacts.size(); ++c) {
        const Vec2<Dual> pv = frame_velocity(model, data, contacts.frames[c]);
        out[2 * c] = pv.x;
        out[2 * c + 1] = pv.y;
      }
    }, true, false);
    dr2.rightCols(nv) = e * sol.factors.J;
  }
  DynamicsDerivatives d;
  MatrixXd y, z;
  sol.factors.solve(-dr1, -dr2, y, z);
  d.fx = y;
  d.lx = z;
  d.fu = MatrixXd::Zero(nv, model.nu());
  d.lu = MatrixXd::Zero(nf, model.nu());
  return d;
}

}  // namespace fbmpc
