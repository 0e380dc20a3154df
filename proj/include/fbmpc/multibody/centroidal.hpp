#pragma once

#include "fbmpc/multibody/algorithms.hpp"

namespace fbmpc {

/// Centroidal quantities of a planar mechanism. Momentum is ordered
/// (k_G, l_Gx, l_Gy), matching the rows of the centroidal momentum matrix.
struct CentroidalQuantities {
  Vector2d com = Vector2d::Zero();
  Vector2d com_velocity = Vector2d::Zero();
  Vector2d linear_momentum = Vector2d::Zero();
  double angular_momentum = 0.0;
  double locked_inertia = 0.0;
  double total_mass = 0.0;
  MatrixXd centroidal_matrix;  ///< A_G, 3 x nv

  Vector3d momentum() const { return {angular_momentum, linear_momentum.x(), linear_momentum.y()}; }
};

inline CentroidalQuantities centroidal(const RobotModel& model, const VectorXd& q, const VectorXd& v) {
  const KinematicsData<double> data = kinematics(model, q, v);
  CentroidalQuantities out;
  out.total_mass = model.total_mass();
  Vec2<double> com, vcom;
  com_kinematics(model, data, com, vcom);
  out.com = to_eigen(com);
  out.com_velocity = to_eigen(vcom);

  const std::vector<MatrixXd> bodyJ = body_jacobians(model, data);
  const int nv = model.nv();
  out.centroidal_matrix = MatrixXd::Zero(3, nv);
  for (std::size_t i = 0; i < model.bodies.size(); ++i) {
    const Body& b = model.bodies[i];
    const Pose2<double>& W = data.world[i];
    const MatrixXd& Jb = bodyJ[i];
    // world CoM velocity Jacobian of body i
    MatrixXd local = Jb.bottomRows(2);
    local.row(0) += -b.com.y() * Jb.row(0);
    local.row(1) += b.com.x() * Jb.row(0);
    Eigen::Matrix2d R;
    R << std::cos(W.theta), -std::sin(W.theta), std::sin(W.theta), std::cos(W.theta);
    const MatrixXd Jc = R * local;
    const Vector2d r = to_eigen(W.act(Vec2<double>(b.com))) - out.com;
    out.centroidal_matrix.row(0) += b.mass * (r.x() * Jc.row(1) - r.y() * Jc.row(0)) + b.inertia * Jb.row(0);
    out.centroidal_matrix.bottomRows(2) += b.mass * Jc;
    out.locked_inertia += b.inertia + b.mass * r.squaredNorm();
  }
  const Vector3d h = out.centroidal_matrix * v;
  out.angular_momentum = h[0];
  out.linear_momentum = h.tail<2>();
  return out;
}

/// Adot_G * v: rate of change of the centroidal momentum at zero acceleration.
inline Vector3d centroidal_momentum_drift(const RobotModel& model, const VectorXd& q, const VectorXd& v) {
  return dual_drift(q, v, 3, [&](const std::vector<Dual>& qd, const std::vector<Dual>& vd, std::vector<Dual>& out) {
    KinematicsData<Dual> data;
    const std::vector<Dual> a(vd.size(), Dual(0.0));
    forward_kinematics<Dual>(model, qd, vd, a, data);
    Dual k;
    Vec2<Dual> l;
    centroidal_momentum(model, data, k, l);
    out[0] = k;
    out[1] = l.x;
    out[2] = l.y;
  });
}

/// CoM Jacobian (2 x nv) and Jdot_com * v.
inline MatrixXd com_jacobian(const RobotModel& model, const VectorXd& q) {
  const CentroidalQuantities c = centroidal(model, q, VectorXd::Zero(model.nv()));
  return c.centroidal_matrix.bottomRows(2) / c.total_mass;
}

inline Vector2d com_drift(const RobotModel& model, const VectorXd& q, const VectorXd& v) {
  return centroidal_momentum_drift(model, q, v).tail<2>() / model.total_mass();
}

/// Sizes (n_x + n_u) of the full-body and centroidal dynamics formulations.
struct ModelDimensions {
  int fullbody = 0;
  int centroidal = 0;
  /// Smallest number of force components at which centroidal >= full-body.
  int crossover_force_dim = 0;
  /// Smallest number of active point contacts at which centroidal >= full-body.
  int crossover_contacts = 0;
};

/// Generic dimension count. `momentum_dim` is 3 in the plane and 6 in space;
/// `force_per_contact` is 2 for planar point feet and 3 for 3-D point feet.
inline ModelDimensions model_dimensions(int nv, int nu, int momentum_dim, int force_per_contact, int contacts) {
  ModelDimensions d;
  const int nf = force_per_contact * contacts;
  d.fullbody = 2 * nv + nu;
  d.centroidal = (momentum_dim + nv) + (nv + nf);
  d.crossover_force_dim = std::max(0, nu - momentum_dim);
  d.crossover_contacts = (d.crossover_force_dim + force_per_contact - 1) / force_per_contact;
  return d;
}

inline ModelDimensions model_dimensions(const RobotModel& model, int active_contacts) {
  return model_dimensions(model.nv(), model.nu(), 3, 2, active_contacts);
}

}  // namespace fbmpc
