#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "fbmpc/multibody/centroidal.hpp"
#include "fbmpc/multibody/state.hpp"
#include "test_util.hpp"

using namespace fbmpc;
using fbmpc::test::Rng;

namespace {

RobotModel pendulum(double m, double l) {
  RobotModel model;
  model.bodies.push_back({"base", 2.0, {0.0, 0.0}, 0.1, -1, JointType::FloatingBase, {}});
  model.bodies.push_back({"link", m, {0.0, -l}, 0.03, 0, JointType::Revolute, {}});
  model.joints.push_back(JointLimits{});
  model.validate();
  return model;
}

// World CoM velocity of each body from positions only: exact derivative along q' = v.
std::vector<Vector2d> brute_force_com_velocities(const RobotModel& model, const VectorXd& q, const VectorXd& v) {
  const int nb = static_cast<int>(model.bodies.size());
  const VectorXd d = dual_drift(q, v, 2 * nb, [&](const std::vector<Dual>& qd, const std::vector<Dual>&,
                                                  std::vector<Dual>& out) {
    KinematicsData<Dual> data;
    const std::vector<Dual> zero(qd.size(), Dual(0.0));
    forward_kinematics<Dual>(model, qd, zero, zero, data);
    for (int i = 0; i < nb; ++i) {
      const Vec2<Dual> p = body_com_position(model, data, i);
      out[2 * i] = p.x;
      out[2 * i + 1] = p.y;
    }
  });
  std::vector<Vector2d> out(nb);
  for (int i = 0; i < nb; ++i) out[i] = d.segment<2>(2 * i);
  return out;
}

double body_angular_rate(const RobotModel& model, const VectorXd& v, int i) {
  double w = 0.0;
  for (int j = i; j > 0; j = model.bodies[j].parent) w += v[RobotModel::joint_velocity_index(j)];
  return w + v[2];
}

}  // namespace

TEST(Integrate, ZeroStepIsIdentity) {
  const RobotModel model = robots::planar_quadruped();
  MultibodyStateSpace ss(model);
  Rng rng;
  VectorXd x(model.nx());
  x << rng.configuration(model), rng.vec(model.nv());
  EXPECT_LT(inf_norm(VectorXd(ss.integrate(x, VectorXd::Zero(ss.ndx())) - x)), 1e-15);
}

TEST(Integrate, PureTranslation) {
  const RobotModel model = robots::single_body(1.0, Vector2d::Zero(), 0.1);
  MultibodyStateSpace ss(model);
  const VectorXd q = ss.integrate_velocity(VectorXd::Zero(3), Vector3d(1.0, 0.0, 0.0), 0.1);
  EXPECT_NEAR(q[0], 0.1, 1e-15);
  EXPECT_NEAR(q[1], 0.0, 1e-15);
  EXPECT_NEAR(q[2], 0.0, 1e-15);
}

TEST(Integrate, AngleWrapsAcrossSeam) {
  const RobotModel model = robots::single_body(1.0, Vector2d::Zero(), 0.1);
  MultibodyStateSpace ss(model);
  const VectorXd q = ss.integrate_velocity(Vector3d(0.0, 0.0, M_PI - 0.1), Vector3d(0.0, 0.0, 2.0), 0.1);
  // Oracle: compose rotation matrices and read the angle back.
  Eigen::Matrix2d R0, R1;
  R0 = Eigen::Rotation2Dd(M_PI - 0.1).toRotationMatrix();
  R1 = Eigen::Rotation2Dd(0.2).toRotationMatrix();
  const Eigen::Matrix2d R = R0 * R1;
  EXPECT_NEAR(q[2], std::atan2(R(1, 0), R(0, 0)), 1e-12);
  EXPECT_NEAR(q[2], -(M_PI - 0.1), 1e-12);
}

TEST(Integrate, DimensionMismatchThrows) {
  MultibodyStateSpace ss(robots::planar_quadruped());
  EXPECT_THROW(ss.integrate(VectorXd::Zero(5), VectorXd::Zero(22)), DimensionMismatch);
  EXPECT_THROW(ss.difference(VectorXd::Zero(22), VectorXd::Zero(21)), DimensionMismatch);
}

TEST(Difference, SelfIsZeroAndRoundTrip) {
  const RobotModel model = robots::planar_quadruped();
  MultibodyStateSpace ss(model);
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    VectorXd x(model.nx());
    x << rng.configuration(model), rng.vec(model.nv());
    const VectorXd dx = rng.vec(ss.ndx(), 2.0);
    EXPECT_LT(inf_norm(ss.difference(x, x)), 1e-15);
    EXPECT_LT(inf_norm(VectorXd(ss.difference(ss.integrate(x, dx), x) - dx)), 1e-10);
    const VectorXd x1 = ss.integrate(x, dx);
    EXPECT_LT(inf_norm(VectorXd(ss.difference(ss.integrate(x, ss.difference(x1, x)), x1))), 1e-12);
  }
}

TEST(Difference, ShortWayAcrossSeam) {
  MultibodyStateSpace ss(3);
  VectorXd x0 = VectorXd::Zero(6), x1 = VectorXd::Zero(6);
  x0[2] = M_PI - 0.05;
  x1[2] = -M_PI + 0.05;
  // SE(2) log oracle: relative rotation R0^T R1 read back with atan2.
  const Eigen::Matrix2d R = Eigen::Rotation2Dd(x0[2]).toRotationMatrix().transpose() *
                            Eigen::Rotation2Dd(x1[2]).toRotationMatrix();
  EXPECT_NEAR(ss.difference(x1, x0)[2], std::atan2(R(1, 0), R(0, 0)), 1e-12);
  EXPECT_NEAR(ss.difference(x1, x0)[2], 0.1, 1e-12);
}

TEST(Difference, JacobiansMatchFiniteDifferences) {
  const RobotModel model = robots::planar_quadruped();
  MultibodyStateSpace ss(model);
  Rng rng(11);
  for (int k = 0; k < 20; ++k) {
    VectorXd x(model.nx()), y(model.nx());
    x << rng.configuration(model), rng.vec(model.nv());
    y << rng.configuration(model), rng.vec(model.nv());
    const VectorXd dx = rng.vec(ss.ndx());
    MatrixXd Jx, Jdx, J1, J0;
    ss.jintegrate(x, dx, &Jx, &Jdx);
    ss.jdifference(y, x, &J1, &J0);
    const VectorXd base = ss.integrate(x, dx);
    const double eps = 1e-6;
    MatrixXd fdx(ss.ndx(), ss.ndx()), fddx(ss.ndx(), ss.ndx()), fd1(ss.ndx(), ss.ndx()), fd0(ss.ndx(), ss.ndx());
    for (int i = 0; i < ss.ndx(); ++i) {
      VectorXd e = VectorXd::Zero(ss.ndx());
      e[i] = eps;
      fdx.col(i) = (ss.difference(ss.integrate(ss.integrate(x, e), dx), base) -
                    ss.difference(ss.integrate(ss.integrate(x, -e), dx), base)) / (2 * eps);
      fddx.col(i) = (ss.difference(ss.integrate(x, dx + e), base) - ss.difference(ss.integrate(x, dx - e), base)) /
                    (2 * eps);
      fd1.col(i) = (ss.difference(ss.integrate(y, e), x) - ss.difference(ss.integrate(y, -e), x)) / (2 * eps);
      fd0.col(i) = (ss.difference(y, ss.integrate(x, e)) - ss.difference(y, ss.integrate(x, -e))) / (2 * eps);
    }
    EXPECT_LT(test::rel_err(Jx, fdx), 1e-6);
    EXPECT_LT(test::rel_err(Jdx, fddx), 1e-6);
    EXPECT_LT(test::rel_err(J1, fd1), 1e-6);
    EXPECT_LT(test::rel_err(J0, fd0), 1e-6);
  }
}

TEST(Rnea, ZeroGravityAtRestIsZero) {
  RobotModel model = robots::planar_quadruped();
  model.gravity.setZero();
  const VectorXd z = VectorXd::Zero(model.nv());
  EXPECT_LT(inf_norm(rnea(model, model.neutral_configuration(), z, z)), 1e-15);
}

TEST(Rnea, PendulumHoldingTorque) {
  const double m = 1.3, l = 0.4;
  const RobotModel model = pendulum(m, l);
  for (double th : {0.0, 0.3, -1.1, 2.5}) {
    VectorXd q = VectorXd::Zero(4);
    q[3] = th;
    const VectorXd tau = rnea(model, q, VectorXd::Zero(4), VectorXd::Zero(4));
    // Lagrangian of the pendulum: V = -m g l cos(th), so the holding torque is dV/dth.
    EXPECT_NEAR(tau[3], m * 9.81 * l * std::sin(th), 1e-12);
  }
}

TEST(Rnea, FreeBodySupportsItsWeight) {
  const double m = 2.5;
  const Vector2d c(0.1, -0.05);
  const RobotModel model = robots::single_body(m, c, 0.2);
  const VectorXd tau = rnea(model, Vector3d::Zero(), Vector3d::Zero(), Vector3d::Zero());
  EXPECT_NEAR(tau[0], 0.0, 1e-14);
  EXPECT_NEAR(tau[1], m * 9.81, 1e-12);
  EXPECT_NEAR(tau[2], c.x() * m * 9.81, 1e-12);
}

TEST(Rnea, ExternalForceEntersAsJacobianTranspose) {
  const RobotModel model = robots::planar_quadruped();
  Rng rng(5);
  const VectorXd q = rng.configuration(model), v = rng.vec(model.nv()), a = rng.vec(model.nv());
  const std::vector<int> contacts{0, 3};
  const VectorXd f = rng.vec(4, 50.0);
  const VectorXd lhs = rnea(model, q, v, a, contacts, f);
  const VectorXd rhs = rnea(model, q, v, a) - contact_jacobian(model, q, contacts).transpose() * f;
  EXPECT_LT(inf_norm(VectorXd(lhs - rhs)), 1e-10);
}

TEST(MassMatrix, SingleBodyFormula) {
  const double m = 3.0, I = 0.2;
  const Vector2d c(0.3, -0.1);
  const RobotModel model = robots::single_body(m, c, I);
  const MatrixXd M = mass_matrix(model, Vector3d::Zero());
  Eigen::Matrix3d expected;
  expected << m, 0.0, -m * c.y(),
              0.0, m, m * c.x(),
              -m * c.y(), m * c.x(), I + m * c.squaredNorm();
  EXPECT_LT((M - expected).lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(MassMatrix, SymmetricPositiveDefiniteAndMatchesRneaProbes) {
  RobotModel model = robots::planar_quadruped();
  model.joints[2].armature = 0.05;
  Rng rng(9);
  for (int k = 0; k < 100; ++k) {
    const VectorXd q = rng.configuration(model, 2.0);
    const MatrixXd M = mass_matrix(model, q);
    EXPECT_LT((M - M.transpose()).lpNorm<Eigen::Infinity>(), 1e-12);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
    const VectorXd g = generalized_gravity(model, q);
    for (int i = 0; i < model.nv(); ++i) {
      const VectorXd col = rnea(model, q, VectorXd::Zero(model.nv()), VectorXd::Unit(model.nv(), i)) - g;
      EXPECT_LT(inf_norm(VectorXd(M.col(i) - col)), 1e-10);
    }
  }
}

TEST(MassMatrix, KineticEnergyRateEqualsPower) {
  // Without contacts d/dt(v'Mv/2) = v'(S u - g) along a trajectory of the dynamics.
  const RobotModel model = robots::serial_chain(3);
  Rng rng(21);
  for (int k = 0; k < 10; ++k) {
    const VectorXd q = rng.configuration(model), v = rng.vec(model.nv()), u = rng.vec(model.nu(), 5.0);
    const VectorXd tau = model.actuation_matrix() * u;
    auto accel = [&](const VectorXd& qq, const VectorXd& vv) -> VectorXd {
      return mass_matrix(model, qq).lu().solve(tau - nonlinear_effects(model, qq, vv));
    };
    auto energy = [&](const VectorXd& qq, const VectorXd& vv) { return 0.5 * vv.dot(mass_matrix(model, qq) * vv); };
    const double eps = 1e-6;
    const VectorXd a = accel(q, v);
    VectorXd qp(model.nq()), qm(model.nq());
    const VectorXd sp = eps * v, sm = -eps * v;
    integrate_configuration<double>(as_span(q), as_span(sp), {qp.data(), qp.size()});
    integrate_configuration<double>(as_span(q), as_span(sm), {qm.data(), qm.size()});
    const double rate = (energy(qp, v + eps * a) - energy(qm, v - eps * a)) / (2 * eps);
    const double power = v.dot(tau - generalized_gravity(model, q));
    EXPECT_NEAR(rate, power, 1e-5 * std::max(1.0, std::abs(power)));
  }
}

TEST(ContactJacobian, BaseOriginFrame) {
  const RobotModel model = robots::single_body(1.0, Vector2d::Zero(), 0.1, Vector2d::Zero());
  const double th = 0.7;
  const MatrixXd J = contact_jacobian(model, Vector3d(0.2, 0.3, th), {0});
  Eigen::Matrix<double, 2, 3> expected;
  expected << std::cos(th), -std::sin(th), 0.0, std::sin(th), std::cos(th), 0.0;
  EXPECT_LT((J - expected).lpNorm<Eigen::Infinity>(), 1e-15);
  // Body-frame velocity (1, 0) with rate w: world point velocity R(1,0) rotating at w,
  // so the point acceleration at zero body acceleration is w * perp(R(1,0)).
  const double w = 1.5;
  const VectorXd jdv = frame_acceleration_bias(model, Vector3d(0.2, 0.3, th), Vector3d(1.0, 0.0, w), {0});
  EXPECT_NEAR(jdv[0], -w * std::sin(th), 1e-14);
  EXPECT_NEAR(jdv[1], w * std::cos(th), 1e-14);
}

TEST(ContactJacobian, OffsetFrameOnRotatingBody) {
  const Vector2d r(0.2, -0.1);
  const RobotModel model = robots::single_body(1.0, Vector2d::Zero(), 0.1, r);
  // Pure rotation about the base origin: centripetal acceleration -w^2 r.
  const VectorXd jdv = frame_acceleration_bias(model, Vector3d::Zero(), Vector3d(0.0, 0.0, 2.0), {0});
  EXPECT_NEAR(jdv[0], -4.0 * r.x(), 1e-14);
  EXPECT_NEAR(jdv[1], -4.0 * r.y(), 1e-14);
}

TEST(ContactJacobian, MatchesFiniteDifferences) {
  const RobotModel model = robots::planar_quadruped();
  Rng rng(13);
  const std::vector<int> contacts{0, 1, 2, 3};
  for (int k = 0; k < 20; ++k) {
    const VectorXd q = rng.configuration(model), v = rng.vec(model.nv());
    const MatrixXd J = contact_jacobian(model, q, contacts);
    const MatrixXd fd = test::fd_state_jacobian(model, q, v, [&](const VectorXd& qq, const VectorXd&) {
      VectorXd p(8);
      for (int c = 0; c < 4; ++c) p.segment<2>(2 * c) = frame_position(model, qq, c);
      return p;
    }).leftCols(model.nv());
    EXPECT_LT(test::rel_err(J, fd), 1e-7);
    // Jdot v: derivative of J(q) v along q' = v.
    const MatrixXd dJv = test::fd_state_jacobian(model, q, v, [&](const VectorXd& qq, const VectorXd&) {
      return VectorXd(contact_jacobian(model, qq, contacts) * v);
    }).leftCols(model.nv()) * v;
    EXPECT_LT(test::rel_err(frame_acceleration_bias(model, q, v, contacts), dJv), 1e-5);
    // Directional FD of J itself.
    const VectorXd dir = rng.vec(model.nv());
    const double eps = 1e-6;
    VectorXd qp(model.nq());
    const VectorXd s = eps * dir;
    integrate_configuration<double>(as_span(q), as_span(s), {qp.data(), qp.size()});
    const MatrixXd dJ = (contact_jacobian(model, qp, contacts) - J) / eps;
    const MatrixXd exact = dual_jacobian(q, v, 8, [&](const std::vector<Dual>& qd, const std::vector<Dual>&,
                                                     std::vector<Dual>& out) {
      KinematicsData<Dual> data;
      const std::vector<Dual> z(qd.size(), Dual(0.0));
      std::vector<Dual> vd(qd.size());
      for (int i = 0; i < model.nv(); ++i) vd[i] = Dual(v[i]);
      forward_kinematics<Dual>(model, qd, vd, z, data);
      for (int c = 0; c < 4; ++c) {
        const Vec2<Dual> fv = frame_velocity(model, data, c);
        out[2 * c] = fv.x;
        out[2 * c + 1] = fv.y;
      }
    }, true, false).leftCols(model.nv()) * dir;
    EXPECT_LT(test::rel_err(dJ * v, exact), 1e-5);
  }
}

TEST(ContactJacobian, StationaryContactHasZeroVelocity) {
  const RobotModel model = robots::planar_quadruped();
  Rng rng(17);
  const VectorXd q = rng.configuration(model);
  const MatrixXd J = contact_jacobian(model, q, {0, 2});
  Eigen::FullPivLU<MatrixXd> lu(J);
  const MatrixXd N = lu.kernel();
  const VectorXd v = N * rng.vec(static_cast<int>(N.cols()));
  ASSERT_GT(v.norm(), 0.1);
  EXPECT_LT(frame_velocity(model, q, v, 0).norm(), 1e-12);
  EXPECT_LT(frame_velocity(model, q, v, 2).norm(), 1e-12);
}

TEST(ContactJacobian, UnknownFrameThrows) {
  const RobotModel model = robots::planar_quadruped();
  EXPECT_THROW(contact_jacobian(model, model.neutral_configuration(), {7}), UnknownContactFrame);
  EXPECT_THROW(model.contact_index("nose"), UnknownContactFrame);
}

TEST(Centroidal, ZeroVelocityZeroMomentum) {
  const RobotModel model = robots::planar_quadruped();
  const CentroidalQuantities c = centroidal(model, model.neutral_configuration(), VectorXd::Zero(model.nv()));
  EXPECT_EQ(c.momentum().norm(), 0.0);
}

TEST(Centroidal, TranslatingBody) {
  const RobotModel model = robots::single_body(2.0, Vector2d(0.1, 0.2), 0.3);
  const CentroidalQuantities c = centroidal(model, Vector3d(0.0, 0.0, 0.4), Vector3d(1.0, -0.5, 0.0));
  EXPECT_NEAR(c.angular_momentum, 0.0, 1e-14);
  const Vector2d vworld = Eigen::Rotation2Dd(0.4) * Vector2d(1.0, -0.5);
  EXPECT_LT((c.linear_momentum - 2.0 * vworld).norm(), 1e-14);
}

TEST(Centroidal, MatrixMatchesBodySum) {
  Rng rng(23);
  for (const RobotModel& model : {robots::serial_chain(1), robots::planar_quadruped()}) {
    for (int k = 0; k < 1000; ++k) {
      const VectorXd q = rng.configuration(model, 2.0), v = rng.vec(model.nv(), 3.0);
      const CentroidalQuantities c = centroidal(model, q, v);
      const KinematicsData<double> data = kinematics(model, q, v);
      const std::vector<Vector2d> vel = brute_force_com_velocities(model, q, v);
      Vector2d pG = Vector2d::Zero();
      for (std::size_t i = 0; i < model.bodies.size(); ++i) {
        pG += model.bodies[i].mass * to_eigen(body_com_position(model, data, static_cast<int>(i)));
      }
      pG /= model.total_mass();
      double k_sum = 0.0;
      Vector2d l_sum = Vector2d::Zero();
      for (std::size_t i = 0; i < model.bodies.size(); ++i) {
        const Body& b = model.bodies[i];
        const Vector2d r = to_eigen(body_com_position(model, data, static_cast<int>(i))) - pG;
        const Vector2d p = b.mass * vel[i];
        k_sum += r.x() * p.y() - r.y() * p.x() + b.inertia * body_angular_rate(model, v, static_cast<int>(i));
        l_sum += p;
      }
      const Vector3d direct(k_sum, l_sum.x(), l_sum.y());
      ASSERT_LT((c.centroidal_matrix * v - direct).lpNorm<Eigen::Infinity>(), 1e-10);
      ASSERT_LT((c.momentum() - direct).lpNorm<Eigen::Infinity>(), 1e-10);
      ASSERT_LT((c.linear_momentum - c.total_mass * c.com_velocity).norm(), 1e-10);
    }
  }
}

TEST(Centroidal, LockedInertiaIsBodySum) {
  const RobotModel model = robots::planar_quadruped();
  const VectorXd q = model.neutral_configuration();
  const CentroidalQuantities c = centroidal(model, q, VectorXd::Zero(model.nv()));
  // A pure base rotation moves everything as one rigid body: k = I_G * w.
  VectorXd v = VectorXd::Zero(model.nv());
  v[2] = 1.0;
  const Vector3d h = c.centroidal_matrix * v;
  EXPECT_NEAR(h[0], c.locked_inertia, 1e-12);
}

TEST(ModelDimensions, PlanarQuadruped) {
  const RobotModel model = robots::planar_quadruped();
  EXPECT_EQ(model.nv(), 11);
  EXPECT_EQ(model.nu(), 8);
  const ModelDimensions d = model_dimensions(model, 0);
  EXPECT_EQ(d.fullbody, 30);
  EXPECT_EQ(d.centroidal, 25);
  // 25 + n_f = 30 at n_f = 5, i.e. a third point contact tips the balance.
  EXPECT_EQ(d.crossover_force_dim, 5);
  EXPECT_EQ(d.crossover_contacts, 3);
  EXPECT_LT(model_dimensions(model, 2).centroidal, model_dimensions(model, 2).fullbody);
  EXPECT_GE(model_dimensions(model, 3).centroidal, model_dimensions(model, 3).fullbody);
}

TEST(ModelDimensions, SpatialQuadrupedTwoFeet) {
  // nv = 18, nu = 12, two 3-D point feet: centroidal equals full-body.
  const ModelDimensions d = model_dimensions(18, 12, 6, 3, 2);
  EXPECT_EQ(d.fullbody, 48);
  EXPECT_EQ(d.centroidal, 48);
  EXPECT_EQ(d.crossover_contacts, 2);
}

TEST(Model, ValidationRejectsBadModels) {
  RobotModel m = robots::planar_quadruped();
  m.bodies[3].mass = 0.0;
  EXPECT_THROW(m.validate(), InvalidModel);
  m = robots::planar_quadruped();
  m.bodies[2].parent = 5;
  EXPECT_THROW(m.validate(), InvalidModel);
  m = robots::planar_quadruped();
  m.joints[0].torque_lower = 50.0;
  EXPECT_THROW(m.validate(), InvalidModel);
  m = robots::planar_quadruped();
  m.bodies[1].inertia = -1.0;
  EXPECT_THROW(m.validate(), InvalidModel);
}
