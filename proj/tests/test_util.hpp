#pragma once

#include <random>

#include "fbmpc/multibody/algorithms.hpp"
#include "fbmpc/multibody/robots.hpp"

namespace fbmpc::test {

class Rng {
public:
  explicit Rng(unsigned seed = 7) : gen_(seed) {}

  double uniform(double lo = -1.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }

  VectorXd vec(int n, double scale = 1.0) {
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(-scale, scale);
    return v;
  }

  VectorXd configuration(const RobotModel& model, double joint_scale = 1.0) {
    VectorXd q = vec(model.nq(), joint_scale);
    q[0] = uniform(-1.0, 1.0);
    q[1] = uniform(0.0, 1.0);
    q[2] = uniform(-M_PI + 1e-3, M_PI);
    return q;
  }

  std::mt19937& engine() { return gen_; }

private:
  std::mt19937 gen_;
};

/// Central finite-difference Jacobian of f over a tangent perturbation of
/// (q, v): q (+) eps e_i for i < nv, v + eps e_i otherwise.
template <typename Fn>
MatrixXd fd_state_jacobian(const RobotModel& model, const VectorXd& q, const VectorXd& v, Fn&& f,
                           double eps = 1e-6) {
  const int nv = model.nv();
  const VectorXd f0 = f(q, v);
  MatrixXd J(f0.size(), 2 * nv);
  for (int i = 0; i < 2 * nv; ++i) {
    VectorXd dq = VectorXd::Zero(nv), dv = VectorXd::Zero(nv);
    if (i < nv) dq[i] = eps;
    else dv[i - nv] = eps;
    VectorXd qp(model.nq()), qm(model.nq());
    const VectorXd mdq = -dq;
    integrate_configuration<double>(as_span(q), as_span(dq), {qp.data(), qp.size()});
    integrate_configuration<double>(as_span(q), as_span(mdq), {qm.data(), qm.size()});
    J.col(i) = (f(qp, v + dv) - f(qm, v - dv)) / (2.0 * eps);
  }
  return J;
}

template <typename Fn>
MatrixXd fd_jacobian(const VectorXd& x, Fn&& f, double eps = 1e-6) {
  const VectorXd f0 = f(x);
  MatrixXd J(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VectorXd xp = x, xm = x;
    xp[i] += eps;
    xm[i] -= eps;
    J.col(i) = (f(xp) - f(xm)) / (2.0 * eps);
  }
  return J;
}

inline double rel_err(const MatrixXd& a, const MatrixXd& b) {
  if (a.size() == 0) return 0.0;
  return (a - b).lpNorm<Eigen::Infinity>() / std::max(1.0, b.lpNorm<Eigen::Infinity>());
}

}  // namespace fbmpc::test
