#include <gtest/gtest.h>

#include <Eigen/LU>

#include "fbmpc/contact/dynamics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace fbmpc;
using fbmpc::test::Rng;

namespace {

ContactSet anchored(const RobotModel& model, const VectorXd& q, std::vector<int> frames, Rng& rng) {
  ContactSet cs;
  cs.frames = std::move(frames);
  for (int f : cs.frames) cs.anchors.push_back(frame_position(model, q, f) + rng.vec(2, 0.01));
  return cs;
}

VectorXd forward_acc(const RobotModel& model, const ContactSet& cs, const VectorXd& q, const VectorXd& v,
                     const VectorXd& u) {
  return contact_forward_dynamics(model, q, v, u, cs).acceleration;
}

}  // namespace

TEST(ContactDynamics, NoContactsIsUnconstrained) {
  const RobotModel model = robots::planar_quadruped();
  Rng rng(1);
  const VectorXd q = rng.configuration(model), v = rng.vec(model.nv()), u = rng.vec(model.nu(), 10.0);
  const ContactSolution sol = contact_forward_dynamics(model, q, v, u, ContactSet{});
  EXPECT_EQ(sol.forces.size(), 0);
  const VectorXd expected = mass_matrix(model, q).lu().solve(model.actuation_matrix() * u - nonlinear_effects(model, q, v));
  EXPECT_LT(inf_norm(VectorXd(sol.acceleration - expected)), 1e-10);
}

TEST(ContactDynamics, RestingBoxCarriesItsWeight) {
  const double m = 4.0;
  const RobotModel model = robots::single_body(m, Vector2d::Zero(), 0.2, Vector2d(0.0, -0.1));
  const Vector3d q(0.0, 0.1, 0.0);
  ContactSet cs;
  cs.frames = {0};
  cs.anchors = {frame_position(model, q, 0)};
  const ContactSolution sol = contact_forward_dynamics(model, q, Vector3d::Zero(), VectorXd(0), cs);
  EXPECT_LT(inf_norm(sol.acceleration), 1e-12);
  EXPECT_NEAR(sol.forces[0], 0.0, 1e-12);
  EXPECT_NEAR(sol.forces[1], m * 9.81, 1e-10);
  EXPECT_LT(sol.kkt_residual, 1e-10);
}

TEST(ContactDynamics, MatchesDenseKktAndInverseDynamics) {
  const RobotModel model = robots::planar_quadruped();
  Rng rng(2);
  for (int k = 0; k < 200; ++k) {
    const VectorXd q = rng.configuration(model), v = rng.vec(model.nv()), u = rng.vec(model.nu(), 20.0);
    const ContactSet cs = anchored(model, q, {0, 3}, rng);
    const ContactSolution sol = contact_forward_dynamics(model, q, v, u, cs);
    VectorXd vdot, lambda;
    oracle::dense_contact_dynamics(model, q, v, u, cs, vdot, lambda);
    EXPECT_LT(inf_norm(VectorXd(sol.acceleration - vdot)), 1e-8);
    EXPECT_LT(inf_norm(VectorXd(sol.forces - lambda)), 1e-8);
    EXPECT_LT(sol.kkt_residual, 1e-9);
    const VectorXd tau = rnea(model, q, v, sol.acceleration, cs.frames, sol.forces);
    EXPECT_LT(inf_norm(VectorXd(tau - model.actuation_matrix() * u)), 1e-9);
  }
}

TEST(ContactDynamics, RankDeficientContactsThrow) {
  RobotModel model = robots::single_body(1.0, Vector2d::Zero(), 0.1, Vector2d(0.1, 0.0));
  model.contacts.push_back({"second", 0, {-0.1, 0.0}});
  ContactSet cs;
  cs.frames = {0, 1};
  EXPECT_THROW(contact_forward_dynamics(model, Vector3d::Zero(), Vector3d::Zero(), VectorXd(0), cs),
               RankDeficientContacts);
}

TEST(ContactDynamics, InvalidInputsThrow) {
  const RobotModel model = robots::planar_quadruped();
  ContactSet cs;
  cs.frames = {0, 0};
  const VectorXd q = model.neutral_configuration(), v = VectorXd::Zero(11), u = VectorXd::Zero(8);
  EXPECT_THROW(contact_forward_dynamics(model, q, v, u, cs), InvalidConfig);
  cs.frames = {9};
  EXPECT_THROW(contact_forward_dynamics(model, q, v, u, cs), UnknownContactFrame);
  EXPECT_THROW(contact_forward_dynamics(model, q, v, VectorXd::Zero(3), ContactSet{}), DimensionMismatch);
}

TEST(ImpulseDynamics, EmptySetKeepsVelocity) {
  const RobotModel model = robots::planar_quadruped();
  Rng rng(3);
  const VectorXd q = rng.configuration(model), v = rng.vec(model.nv());
  const ImpulseSolution sol = impulse_dynamics(model, q, v, ContactSet{});
  EXPECT_LT(inf_norm(VectorXd(sol.post_velocity - v)), 1e-12);
  EXPECT_EQ(sol.impulses.size(), 0);
}

TEST(ImpulseDynamics, InelasticPointMassLanding) {
  const double m = 3.0, w = 1.7;
  const RobotModel model = robots::single_body(m, Vector2d::Zero(), 0.05, Vector2d::Zero());
  ContactSet cs;
  cs.frames = {0};
  const ImpulseSolution sol = impulse_dynamics(model, Vector3d::Zero(), Vector3d(0.0, -w, 0.0), cs, 0.0);
  EXPECT_NEAR(sol.impulses[0], 0.0, 1e-12);
  EXPECT_NEAR(sol.impulses[1], m * w, 1e-12);
  EXPECT_LT(sol.post_velocity.norm(), 1e-12);
  // d Lambda_n / d v-_y = -m, i.e. m per unit of falling speed.
  const DynamicsDerivatives d = impulse_dynamics_derivatives(model, Vector3d::Zero(), Vector3d(0.0, -w, 0.0), cs, sol);
  EXPECT_NEAR(d.lx(1, 3 + 1), -m, 1e-12);
}

TEST(ImpulseDynamics, RestitutionAndMomentumBalance) {
  const RobotModel model = robots::planar_quadruped();
  Rng rng(4);
  for (int k = 0; k < 200; ++k) {
    const VectorXd q = rng.configuration(model), v = rng.vec(model.nv(), 2.0);
    ContactSet cs;
    cs.frames = {1, 2};
    const double e = rng.uniform(0.0, 1.0);
    const ImpulseSolution sol = impulse_dynamics(model, q, v, cs, e);
    const MatrixXd M = mass_matrix(model, q), J = contact_jacobian(model, q, cs.frames);
    EXPECT_LT(inf_norm(VectorXd(M * (sol.post_velocity - v) - J.transpose() * sol.impulses)), 1e-10);
    EXPECT_LT(inf_norm(VectorXd(J * sol.post_velocity + e * J * v)), 1e-9);
    EXPECT_LE(0.5 * sol.post_velocity.dot(M * sol.post_velocity), 0.5 * v.dot(M * v) + 1e-10);
    VectorXd vp, imp;
    oracle::dense_impulse_dynamics(model, q, v, cs, e, vp, imp);
    EXPECT_LT(inf_norm(VectorXd(vp - sol.post_velocity)), 1e-8);
    EXPECT_LT(inf_norm(VectorXd(imp - sol.impulses)), 1e-8);
  }
  EXPECT_THROW(impulse_dynamics(model, model.neutral_configuration(), VectorXd::Zero(11), ContactSet{}, 1.5),
               InvalidConfig);
}

TEST(ContactDerivatives, NoContactsReduce) {
  const RobotModel model = robots::serial_chain(2);
  Rng rng(5);
  const VectorXd q = rng.configuration(model), v = rng.vec(model.nv()), u = rng.vec(model.nu());
  const ContactSolution sol = contact_forward_dynamics(model, q, v, u, ContactSet{});
  const DynamicsDerivatives d = contact_dynamics_derivatives(model, q, v, u, ContactSet{}, sol);
  EXPECT_EQ(d.lx.rows(), 0);
  EXPECT_EQ(d.lu.rows(), 0);
  const MatrixXd expected = mass_matrix(model, q).lu().solve(model.actuation_matrix());
  EXPECT_LT(test::rel_err(d.fu, expected), 1e-12);
}

TEST(ContactDerivatives, ForceControlBlockClosedForm) {
  const RobotModel model = robots::planar_quadruped();
  Rng rng(6);
  const VectorXd q = model.neutral_configuration(), v = VectorXd::Zero(model.nv()), u = VectorXd::Zero(model.nu());
  const ContactSet cs = anchored(model, q, {0, 1, 2, 3}, rng);
  // Feet overlap pairwise, so use one front and one hind foot for a full-rank set.
  ContactSet two = cs;
  two.frames = {0, 2};
  two.anchors = {cs.anchors[0], cs.anchors[2]};
  const ContactSolution sol = contact_forward_dynamics(model, q, v, u, two);
  const DynamicsDerivatives d = contact_dynamics_derivatives(model, q, v, u, two, sol);
  const MatrixXd M = mass_matrix(model, q), J = contact_jacobian(model, q, two.frames);
  const MatrixXd Minv = M.inverse();
  const MatrixXd closed = -(J * Minv * J.transpose()).inverse() * J * Minv * model.actuation_matrix();
  EXPECT_LT(test::rel_err(d.lu, closed), 1e-10);
  const MatrixXd fd = test::fd_jacobian(u, [&](const VectorXd& uu) {
    return VectorXd(contact_forward_dynamics(model, q, v, uu, two).forces);
  });
  EXPECT_LT(test::rel_err(d.lu, fd), 1e-5);
}

TEST(ContactDerivatives, MatchFiniteDifferences) {
  Rng rng(7);
  for (const RobotModel& model : {robots::serial_chain(5), robots::planar_quadruped()}) {
    const std::vector<int> frames = model.contacts.size() == 2 ? std::vector<int>{0, 1} : std::vector<int>{0, 3};
    for (int k = 0; k < 20; ++k) {
      const VectorXd q = rng.configuration(model), v = rng.vec(model.nv()), u = rng.vec(model.nu(), 10.0);
      const ContactSet cs = anchored(model, q, frames, rng);
      const ContactSolution sol = contact_forward_dynamics(model, q, v, u, cs);
      const DynamicsDerivatives d = contact_dynamics_derivatives(model, q, v, u, cs, sol);
      const MatrixXd fx = test::fd_state_jacobian(model, q, v, [&](const VectorXd& qq, const VectorXd& vv) {
        return forward_acc(model, cs, qq, vv, u);
      });
      const MatrixXd lx = test::fd_state_jacobian(model, q, v, [&](const VectorXd& qq, const VectorXd& vv) {
        return VectorXd(contact_forward_dynamics(model, qq, vv, u, cs).forces);
      });
      const MatrixXd fu = test::fd_jacobian(u, [&](const VectorXd& uu) { return forward_acc(model, cs, q, v, uu); });
      EXPECT_LT(test::rel_err(d.fx, fx), 1e-4);
      EXPECT_LT(test::rel_err(d.lx, lx), 1e-4);
      EXPECT_LT(test::rel_err(d.fu, fu), 1e-4);
    }
  }
}

TEST(ImpulseDerivatives, EmptySetIsIdentity) {
  const RobotModel model = robots::planar_quadruped();
  Rng rng(8);
  const VectorXd q = rng.configuration(model), v = rng.vec(model.nv());
  const ImpulseSolution sol = impulse_dynamics(model, q, v, ContactSet{});
  const DynamicsDerivatives d = impulse_dynamics_derivatives(model, q, v, ContactSet{}, sol);
  EXPECT_LT(inf_norm(MatrixXd(d.fx.leftCols(11))), 1e-12);
  EXPECT_LT(test::rel_err(d.fx.rightCols(11), MatrixXd::Identity(11, 11)), 1e-12);
  EXPECT_EQ(inf_norm(d.fu), 0.0);
}

TEST(ImpulseDerivatives, MatchFiniteDifferences) {
  const RobotModel model = robots::planar_quadruped();
  Rng rng(9);
  for (int k = 0; k < 20; ++k) {
    const VectorXd q = rng.configuration(model), v = rng.vec(model.nv(), 2.0);
    ContactSet cs;
    cs.frames = {1, 3};
    const double e = rng.uniform(0.0, 1.0);
    const ImpulseSolution sol = impulse_dynamics(model, q, v, cs, e);
    const DynamicsDerivatives d = impulse_dynamics_derivatives(model, q, v, cs, sol);
    const MatrixXd fx = test::fd_state_jacobian(model, q, v, [&](const VectorXd& qq, const VectorXd& vv) {
      return VectorXd(impulse_dynamics(model, qq, vv, cs, e).post_velocity);
    });
    const MatrixXd lx = test::fd_state_jacobian(model, q, v, [&](const VectorXd& qq, const VectorXd& vv) {
      return VectorXd(impulse_dynamics(model, qq, vv, cs, e).impulses);
    });
    EXPECT_LT(test::rel_err(d.fx, fx), 1e-4);
    EXPECT_LT(test::rel_err(d.lx, lx), 1e-4);
    EXPECT_EQ(inf_norm(d.fu), 0.0);
  }
}
