#pragma once

#include "fbmpc/multibody/algorithms.hpp"
#include "fbmpc/state_space.hpp"

namespace fbmpc {

/// State x = (q, v) of a planar floating-base robot. q = (x, y, theta, joints)
/// with theta wrapped to (-pi, pi]; v = (base linear velocity in the base
/// frame, base angular rate, joint rates).
class MultibodyStateSpace final : public StateSpace {
public:
  explicit MultibodyStateSpace(const RobotModel& model) : nq_(model.nq()), nv_(model.nv()) {}
  explicit MultibodyStateSpace(int nv) : nq_(nv), nv_(nv) {}

  int nx() const override { return nq_ + nv_; }
  int ndx() const override { return 2 * nv_; }
  int nv() const { return nv_; }

  VectorXd integrate(const VectorXd& x, const VectorXd& dx) const override {
    check_dim(x.size(), nx(), "state");
    check_dim(dx.size(), ndx(), "tangent");
    VectorXd out(nx());
    integrate_configuration<double>(span(x, 0, nq_), span(dx, 0, nv_), mspan(out, 0, nq_));
    out.tail(nv_) = x.tail(nv_) + dx.tail(nv_);
    return out;
  }

  VectorXd difference(const VectorXd& x1, const VectorXd& x0) const override {
    check_dim(x1.size(), nx(), "state");
    check_dim(x0.size(), nx(), "state");
    VectorXd out(ndx());
    difference_configuration<double>(span(x1, 0, nq_), span(x0, 0, nq_), mspan(out, 0, nv_));
    out.tail(nv_) = x1.tail(nv_) - x0.tail(nv_);
    return out;
  }

  void jintegrate(const VectorXd& x, const VectorXd& dx, MatrixXd* Jx, MatrixXd* Jdx) const override {
    const VectorXd out = integrate(x, dx);
    if (Jx) {
      Jx->setIdentity(ndx(), ndx());
      Jx->topLeftCorner<3, 3>() = base_block(x, dx, out, true);
    }
    if (Jdx) {
      Jdx->setIdentity(ndx(), ndx());
      Jdx->topLeftCorner<3, 3>() = base_block(x, dx, out, false);
    }
  }

  void jdifference(const VectorXd& x1, const VectorXd& x0, MatrixXd* J1, MatrixXd* J0) const override {
    const VectorXd d = difference(x1, x0);
    if (J1) {
      J1->setIdentity(ndx(), ndx());
      J1->topLeftCorner<3, 3>() = diff_block(x1, x0, d, true);
    }
    if (J0) {
      *J0 = -MatrixXd::Identity(ndx(), ndx());
      J0->topLeftCorner<3, 3>() = diff_block(x1, x0, d, false);
    }
  }

  /// q (+) v*dt, the configuration update used by the semi-implicit integrator.
  VectorXd integrate_velocity(const VectorXd& q, const VectorXd& v, double dt) const {
    check_dim(q.size(), nq_, "configuration");
    check_dim(v.size(), nv_, "velocity");
    VectorXd out(nq_);
    const VectorXd step = v * dt;
    integrate_configuration<double>(span(q, 0, nq_), span(step, 0, nv_), mspan(out, 0, nq_));
    return out;
  }

private:
  static std::span<const double> span(const VectorXd& v, int off, int n) {
    return {v.data() + off, static_cast<std::size_t>(n)};
  }
  static std::span<double> mspan(VectorXd& v, int off, int n) { return {v.data() + off, static_cast<std::size_t>(n)}; }

  static Pose2<Dual> pose(const VectorXd& x) { return {{Dual(x[0]), Dual(x[1])}, Dual(x[2])}; }

  // d/d(eps) log(out^-1 * next(eps)) for a perturbation of x (wrt_x) or dx.
  static Eigen::Matrix3d base_block(const VectorXd& x, const VectorXd& dx, const VectorXd& out, bool wrt_x) {
    Eigen::Matrix3d J;
    const Pose2<Dual> out_inv = pose(out).inverse();
    for (int i = 0; i < 3; ++i) {
      Dual e[3] = {Dual(0.0), Dual(0.0), Dual(0.0)};
      e[i].d = 1.0;
      Pose2<Dual> next;
      if (wrt_x) {
        const Pose2<Dual> pert = pose(x).compose(se2::exp(e[0], e[1], e[2]));
        next = pert.compose(se2::exp(Dual(dx[0]), Dual(dx[1]), Dual(dx[2])));
      } else {
        next = pose(x).compose(se2::exp(Dual(dx[0]) + e[0], Dual(dx[1]) + e[1], Dual(dx[2]) + e[2]));
      }
      Dual a, b, w;
      se2::log(out_inv.compose(next), a, b, w);
      J.col(i) << a.d, b.d, w.d;
    }
    return J;
  }

  static Eigen::Matrix3d diff_block(const VectorXd& x1, const VectorXd& x0, const VectorXd& d, bool wrt_x1) {
    Eigen::Matrix3d J;
    (void)d;
    for (int i = 0; i < 3; ++i) {
      Dual e[3] = {Dual(0.0), Dual(0.0), Dual(0.0)};
      e[i].d = 1.0;
      Pose2<Dual> p1 = pose(x1), p0 = pose(x0);
      if (wrt_x1) p1 = p1.compose(se2::exp(e[0], e[1], e[2]));
      else p0 = p0.compose(se2::exp(e[0], e[1], e[2]));
      Dual a, b, w;
      se2::log(p0.inverse().compose(p1), a, b, w);
      J.col(i) << a.d, b.d, w.d;
    }
    return J;
  }

  int nq_;
  int nv_;
};

}  // namespace fbmpc
