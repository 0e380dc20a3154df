#pragma once

#include "fbmpc/common.hpp"

namespace fbmpc {

/// Differentiable manifold interface used by the shooting problem and solver.
/// difference(x1, x0) returns d with x0 (+) d = x1.
class StateSpace {
public:
  virtual ~StateSpace() = default;

  virtual int nx() const = 0;
  virtual int ndx() const = 0;

  virtual VectorXd integrate(const VectorXd& x, const VectorXd& dx) const = 0;
  virtual VectorXd difference(const VectorXd& x1, const VectorXd& x0) const = 0;

  /// Jacobians of x (+) dx with respect to x and dx.
  virtual void jintegrate(const VectorXd& x, const VectorXd& dx, MatrixXd* Jx, MatrixXd* Jdx) const = 0;
  /// Jacobians of x1 (-) x0 with respect to x1 and x0.
  virtual void jdifference(const VectorXd& x1, const VectorXd& x0, MatrixXd* J1, MatrixXd* J0) const = 0;
};

class EuclideanStateSpace final : public StateSpace {
public:
  explicit EuclideanStateSpace(int n) : n_(n) {}

  int nx() const override { return n_; }
  int ndx() const override { return n_; }

  VectorXd integrate(const VectorXd& x, const VectorXd& dx) const override {
    check_dim(x.size(), n_, "state");
    check_dim(dx.size(), n_, "tangent");
    return x + dx;
  }
  VectorXd difference(const VectorXd& x1, const VectorXd& x0) const override {
    check_dim(x1.size(), n_, "state");
    check_dim(x0.size(), n_, "state");
    return x1 - x0;
  }
  void jintegrate(const VectorXd&, const VectorXd&, MatrixXd* Jx, MatrixXd* Jdx) const override {
    if (Jx) Jx->setIdentity(n_, n_);
    if (Jdx) Jdx->setIdentity(n_, n_);
  }
  void jdifference(const VectorXd&, const VectorXd&, MatrixXd* J1, MatrixXd* J0) const override {
    if (J1) J1->setIdentity(n_, n_);
    if (J0) *J0 = -MatrixXd::Identity(n_, n_);
  }

private:
  int n_;
};

}  // namespace fbmpc
