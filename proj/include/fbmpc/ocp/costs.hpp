#pragma once

#include "fbmpc/contact/dynamics.hpp"
#include "fbmpc/multibody/state.hpp"

namespace fbmpc {

/// Planar friction cone on a surface rotated by `angle` (normal = R(angle) e_y).
struct FrictionCone {
  double mu = 0.7;
  double angle = 0.0;
  double lambda_min = 0.0;
};

/// C (3 x 2) and c with C lambda >= c: rows mu n - t >= 0, mu n + t >= 0,
/// n >= lambda_min, where (t, n) are surface-frame components of lambda.
struct ConeMatrices {
  Eigen::Matrix<double, 3, 2> C;
  Vector3d c;
  bool feasible(const Vector2d& lambda, double tol = 0.0) const { return ((C * lambda - c).array() >= -tol).all(); }
};

inline ConeMatrices cone_matrices(const FrictionCone& cone) {
  if (cone.mu < 0.0 || cone.lambda_min < 0.0) throw InvalidConfig("friction cone needs mu >= 0, lambda_min >= 0");
  Eigen::Matrix<double, 3, 2> A;
  A << -1.0, cone.mu,
        1.0, cone.mu,
        0.0, 1.0;
  const Eigen::Matrix2d R = Eigen::Rotation2Dd(cone.angle).toRotationMatrix();
  ConeMatrices m;
  m.C = A * R.transpose();
  m.c = Vector3d(0.0, 0.0, cone.lambda_min);
  return m;
}

/// Value, gradient and Gauss-Newton Hessian of a sum of weighted squared
/// residuals r' W r over the state tangent and control.
struct CostAccumulator {
  double value = 0.0;
  bool derivatives = false;
  VectorXd Lx, Lu;
  MatrixXd Lxx, Lxu, Luu;

  void reset(int ndx, int nu, bool with_derivatives) {
    value = 0.0;
    derivatives = with_derivatives;
    if (derivatives) {
      Lx.setZero(ndx);
      Lu.setZero(nu);
      Lxx.setZero(ndx, ndx);
      Lxu.setZero(ndx, nu);
      Luu.setZero(nu, nu);
    }
  }

  /// Adds r' diag(w) r. Rx/Ru are the residual Jacobians (empty Ru means none).
  void add(const VectorXd& w, const VectorXd& r, const MatrixXd& Rx, const MatrixXd& Ru = MatrixXd()) {
    value += r.dot(w.cwiseProduct(r));
    if (!derivatives) return;
    const VectorXd wr = 2.0 * w.cwiseProduct(r);
    const MatrixXd WRx = 2.0 * w.asDiagonal() * Rx;
    Lx.noalias() += Rx.transpose() * wr;
    Lxx.noalias() += Rx.transpose() * WRx;
    if (Ru.size() > 0) {
      Lu.noalias() += Ru.transpose() * wr;
      Lxu.noalias() += WRx.transpose() * Ru;
      Luu.noalias() += Ru.transpose() * (2.0 * w.asDiagonal() * Ru);
    }
  }

  void add(double w, const VectorXd& r, const MatrixXd& Rx, const MatrixXd& Ru = MatrixXd()) {
    add(VectorXd::Constant(r.size(), w), r, Rx, Ru);
  }
};

/// Active rows of the cone violation max(0, c - C lambda) and their Jacobian
/// -C_active d(lambda)/d(.).
struct ConeResidual {
  VectorXd r;
  MatrixXd Rlambda;  ///< d r / d lambda (rows x 2)
};

inline ConeResidual cone_residual(const ConeMatrices& cone, const Vector2d& lambda) {
  const Vector3d viol = cone.c - cone.C * lambda;
  ConeResidual out;
  out.r = Vector3d::Zero();
  out.Rlambda = MatrixXd::Zero(3, 2);
  for (int i = 0; i < 3; ++i) {
    if (viol[i] > 0.0) {
      out.r[i] = viol[i];
      out.Rlambda.row(i) = -cone.C.row(i);
    }
  }
  return out;
}

/// Penalty w * ||max(0, c - C lambda)||^2 with gradient and Gauss-Newton Hessian in lambda.
struct PenaltyValue {
  double value = 0.0;
  VectorXd gradient;
  MatrixXd hessian;
};

inline PenaltyValue cone_penalty(const ConeMatrices& cone, const Vector2d& lambda, double w) {
  const ConeResidual cr = cone_residual(cone, lambda);
  PenaltyValue p;
  p.value = w * cr.r.squaredNorm();
  p.gradient = 2.0 * w * cr.Rlambda.transpose() * cr.r;
  p.hessian = 2.0 * w * cr.Rlambda.transpose() * cr.Rlambda;
  return p;
}

/// Quadratic penalty of a box violation: residual x - clamp(x, lo, hi).
inline PenaltyValue bound_penalty(const VectorXd& x, const VectorXd& lo, const VectorXd& hi, double w) {
  const VectorXd r = x - x.cwiseMax(lo).cwiseMin(hi);
  PenaltyValue p;
  p.value = w * r.squaredNorm();
  p.gradient = 2.0 * w * r;
  p.hessian = MatrixXd::Zero(x.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (r[i] != 0.0) p.hessian(i, i) = 2.0 * w;
  }
  return p;
}

// ---------------------------------------------------------------------------
// kinematic residuals with exact Jacobians

/// World velocity of contact frames and its Jacobian over (dq, dv).
inline void frame_velocity_jacobian(const RobotModel& model, const VectorXd& q, const VectorXd& v,
                                    const std::vector<int>& frames, VectorXd& vel, MatrixXd& Jx) {
  const int m = 2 * static_cast<int>(frames.size());
  vel.resize(m);
  for (std::size_t c = 0; c < frames.size(); ++c) vel.segment<2>(2 * c) = frame_velocity(model, q, v, frames[c]);
  Jx = dual_jacobian(q, v, m, [&](const std::vector<Dual>& qd, const std::vector<Dual>& vd, std::vector<Dual>& out) {
    KinematicsData<Dual> data;
    const std::vector<Dual> z(qd.size(), Dual(0.0));
    forward_kinematics<Dual>(model, qd, vd, z, data);
    for (std::size_t c = 0; c < frames.size(); ++c) {
      const Vec2<Dual> pv = frame_velocity(model, data, frames[c]);
      out[2 * c] = pv.x;
      out[2 * c + 1] = pv.y;
    }
  });
}

/// r = S u - g(q) + J(q)' lambda, evaluated as S u - rnea(q, 0, 0, lambda).
/// Jacobians chain through lambda_x, lambda_u.
inline VectorXd quasi_static_residual(const RobotModel& model, const VectorXd& q, const VectorXd& u,
                                      const std::vector<int>& frames, const VectorXd& lambda,
                                      const MatrixXd* lx = nullptr, const MatrixXd* lu = nullptr,
                                      MatrixXd* Rx = nullptr, MatrixXd* Ru = nullptr) {
  const int nv = model.nv();
  const VectorXd zero = VectorXd::Zero(nv);
  const VectorXd r = model.actuation_matrix() * u - rnea(model, q, zero, zero, frames, lambda);
  if (Rx && Ru) {
    std::vector<FrameForce<Dual>> fext(frames.size());
    for (std::size_t c = 0; c < frames.size(); ++c) fext[c] = {frames[c], {Dual(lambda[2 * c]), Dual(lambda[2 * c + 1])}};
    const std::vector<Dual> zd(static_cast<std::size_t>(nv), Dual(0.0));
    MatrixXd dq = dual_jacobian(q, zero, nv, [&](const std::vector<Dual>& qd, const std::vector<Dual>&,
                                                 std::vector<Dual>& out) {
      KinematicsData<Dual> data;
      rnea<Dual>(model, qd, zd, zd, fext, true, out, data);
    }, true, false);
    *Rx = -dq;
    *Ru = model.actuation_matrix();
    if (!frames.empty()) {
      const MatrixXd Jt = contact_jacobian(model, q, frames).transpose();
      *Rx += Jt * *lx;
      *Ru += Jt * *lu;
    }
  }
  return r;
}

/// Quasi-static regularization ||S u - g(q) + J' lambda||^2_W; zero by
/// contract when no contact is active.
inline double quasi_static_regularization(const RobotModel& model, const VectorXd& q, const VectorXd& u,
                                          const std::vector<int>& frames, const VectorXd& lambda,
                                          const VectorXd& weights) {
  if (frames.empty()) return 0.0;
  const VectorXd r = quasi_static_residual(model, q, u, frames, lambda);
  return r.dot(weights.cwiseProduct(r));
}

}  // namespace fbmpc
