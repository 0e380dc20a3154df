#pragma once

#include <Eigen/QR>

#include "fbmpc/contact/dynamics.hpp"

namespace fbmpc {

struct QuasiStatic {
  VectorXd u;
  VectorXd lambda;
  double residual = 0.0;  ///< |S u + J' lambda - g|_inf
};

/// Torques and contact forces holding posture q at rest: S u + J' lambda = g(q).
/// The base rows fix the forces (minimum-norm solution), the joint rows then
/// give the torques. Throws when the base rows admit no equilibrium.
inline QuasiStatic quasi_static_start(const RobotModel& model, const VectorXd& q, const std::vector<int>& frames) {
  check_dim(q.size(), model.nq(), "configuration");
  if (frames.empty()) throw RankDeficientContacts("quasi-static solve needs at least one contact");
  validate_contacts(model, frames);
  const VectorXd g = generalized_gravity(model, q);
  const MatrixXd Jt = contact_jacobian(model, q, frames).transpose();
  QuasiStatic out;
  const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(Jt.topRows(3));
  out.lambda = cod.solve(g.head<3>());
  const int nj = model.nj();
  out.u = g.tail(nj) - Jt.bottomRows(nj) * out.lambda;
  out.residual = (model.actuation_matrix() * out.u + Jt * out.lambda - g).lpNorm<Eigen::Infinity>();
  if (!(out.residual < 1e-9 * std::max(1.0, g.lpNorm<Eigen::Infinity>()))) {
    throw RankDeficientContacts("stacked [S J'] admits no static equilibrium (residual " +
                                std::to_string(out.residual) + ")");
  }
  return out;
}

}  // namespace fbmpc
