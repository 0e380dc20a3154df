#pragma once

#include "fbmpc/ocp/action.hpp"

namespace fbmpc {

/// Central finite differences of a node: step map (on the manifold) and cost
/// gradient. Used by the derivative checker and the tests.
struct NodeDerivatives {
  MatrixXd Fx, Fu;
  VectorXd Lx, Lu;
};

inline NodeDerivatives finite_difference_node(const ActionModel& model, const VectorXd& x, const VectorXd& u,
                                              double eps = 1e-6) {
  const StateSpace& S = model.state();
  const int ndx = S.ndx(), nu = model.nu();
  auto data = model.create_data();
  model.calc(*data, x, u);
  const VectorXd x1 = data->xnext;
  auto eval = [&](const VectorXd& xe, const VectorXd& ue, VectorXd& step, double& cost) {
    model.calc(*data, xe, ue);
    step = S.difference(data->xnext, x1);
    cost = data->cost;
  };
  NodeDerivatives out;
  out.Fx.resize(ndx, ndx);
  out.Fu.resize(ndx, nu);
  out.Lx.resize(ndx);
  out.Lu.resize(nu);
  VectorXd sp, sm;
  double cp, cm;
  for (int i = 0; i < ndx; ++i) {
    VectorXd dx = VectorXd::Zero(ndx);
    dx[i] = eps;
    eval(S.integrate(x, dx), u, sp, cp);
    eval(S.integrate(x, -dx), u, sm, cm);
    out.Fx.col(i) = (sp - sm) / (2.0 * eps);
    out.Lx[i] = (cp - cm) / (2.0 * eps);
  }
  for (int i = 0; i < nu; ++i) {
    VectorXd up = u, um = u;
    up[i] += eps;
    um[i] -= eps;
    eval(x, up, sp, cp);
    eval(x, um, sm, cm);
    out.Fu.col(i) = (sp - sm) / (2.0 * eps);
    out.Lu[i] = (cp - cm) / (2.0 * eps);
  }
  return out;
}

}  // namespace fbmpc
