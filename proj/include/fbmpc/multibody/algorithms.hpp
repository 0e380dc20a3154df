#pragma once

#include <span>
#include <vector>

#include "fbmpc/multibody/model.hpp"

namespace fbmpc {

/// Planar spatial motion (angular rate, linear velocity of the frame origin),
/// expressed in body coordinates.
template <typename T>
struct Motion {
  T w{};
  Vec2<T> v{};
};

/// Planar spatial force (moment about the frame origin, linear force).
template <typename T>
struct Force {
  T n{};
  Vec2<T> f{};
};

template <typename T>
struct KinematicsData {
  std::vector<Pose2<T>> world;  ///< world pose of each body frame
  std::vector<Pose2<T>> rel;    ///< pose of each body frame in its parent frame
  std::vector<Motion<T>> vel;
  std::vector<Motion<T>> acc;
};

/// A force applied at a contact frame, expressed in the world frame.
template <typename T>
struct FrameForce {
  int contact = 0;
  Vec2<T> force{};
};

// ---------------------------------------------------------------------------
// configuration manifold

/// q (+) dq on SE(2) x R^nj. dq is a body-frame tangent vector.
template <typename T>
void integrate_configuration(std::span<const T> q, std::span<const T> dq, std::span<T> out) {
  const Pose2<T> base{{q[0], q[1]}, q[2]};
  const Pose2<T> next = base.compose(se2::exp(dq[0], dq[1], dq[2]));
  out[0] = next.t.x;
  out[1] = next.t.y;
  out[2] = next.theta - T(value(next.theta) - wrap_angle(value(next.theta)));
  for (std::size_t i = 3; i < q.size(); ++i) out[i] = q[i] + dq[i];
}

/// q1 (-) q0, i.e. the tangent vector d such that q0 (+) d = q1.
template <typename T>
void difference_configuration(std::span<const T> q1, std::span<const T> q0, std::span<T> out) {
  const Pose2<T> p0{{q0[0], q0[1]}, q0[2]};
  const Pose2<T> p1{{q1[0], q1[1]}, q1[2]};
  se2::log(p0.inverse().compose(p1), out[0], out[1], out[2]);
  for (std::size_t i = 3; i < q0.size(); ++i) out[i] = q1[i] - q0[i];
}

// ---------------------------------------------------------------------------
// recursive kernels

namespace detail {

template <typename T>
Motion<T> to_child(const Pose2<T>& rel, const Motion<T>& m) {
  return {m.w, rel.rotate_inv(m.v + m.w * perp(rel.t))};
}

template <typename T>
Force<T> to_parent(const Pose2<T>& rel, const Force<T>& f) {
  const Vec2<T> fp = rel.rotate(f.f);
  return {f.n + cross(rel.t, fp), fp};
}

template <typename T>
Force<T> inertia_times(const Body& b, const Motion<T>& m) {
  const Vec2<T> c(b.com);
  const Vec2<T> vc = m.v + m.w * perp(c);
  const Vec2<T> lin = T(b.mass) * vc;
  return {T(b.inertia) * m.w + cross(c, lin), lin};
}

// m x* f
template <typename T>
Force<T> cross_force(const Motion<T>& m, const Force<T>& f) {
  return {cross(m.v, f.f), m.w * perp(f.f)};
}

}  // namespace detail

/// Forward kinematics: poses, body velocities and body accelerations. With
/// `gravity` set, the base acceleration is offset by -g (RNEA convention).
template <typename T>
void forward_kinematics(const RobotModel& model, std::span<const T> q, std::span<const T> v,
                        std::span<const T> a, KinematicsData<T>& data, bool gravity = false) {
  const std::size_t nb = model.bodies.size();
  data.world.resize(nb);
  data.rel.resize(nb);
  data.vel.resize(nb);
  data.acc.resize(nb);

  data.world[0] = Pose2<T>{{q[0], q[1]}, q[2]};
  data.rel[0] = data.world[0];
  data.vel[0] = Motion<T>{v[2], {v[0], v[1]}};
  data.acc[0] = Motion<T>{a[2], {a[0], a[1]}};
  if (gravity) {
    const Vec2<T> g(model.gravity);
    data.acc[0].v -= data.world[0].rotate_inv(g);
  }
  for (std::size_t i = 1; i < nb; ++i) {
    const Body& b = model.bodies[i];
    const int iv = RobotModel::joint_velocity_index(static_cast<int>(i));
    const Pose2<T> rel{Vec2<T>(b.placement.t.x, b.placement.t.y), T(b.placement.theta) + q[iv]};
    data.rel[i] = rel;
    data.world[i] = data.world[b.parent].compose(rel);
    Motion<T> vi = detail::to_child(rel, data.vel[b.parent]);
    vi.w += v[iv];
    Motion<T> ai = detail::to_child(rel, data.acc[b.parent]);
    ai.w += a[iv];
    // v_i x (S qd) = (0, -qd * perp(v_i.v))
    ai.v -= v[iv] * perp(vi.v);
    data.vel[i] = vi;
    data.acc[i] = ai;
  }
}

/// Recursive Newton-Euler: tau = M a + h - sum_c J_c^T f_c.
template <typename T>
void rnea(const RobotModel& model, std::span<const T> q, std::span<const T> v, std::span<const T> a,
          std::span<const FrameForce<T>> fext, bool gravity, std::span<T> tau, KinematicsData<T>& data) {
  forward_kinematics(model, q, v, a, data, gravity);
  const std::size_t nb = model.bodies.size();
  std::vector<Force<T>> f(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    const Body& b = model.bodies[i];
    const Force<T> Iv = detail::inertia_times(b, data.vel[i]);
    const Force<T> Ia = detail::inertia_times(b, data.acc[i]);
    const Force<T> bias = detail::cross_force(data.vel[i], Iv);
    f[i] = {Ia.n + bias.n, Ia.f + bias.f};
  }
  for (const auto& fe : fext) {
    const ContactFrame& cf = model.contacts[fe.contact];
    const Vec2<T> local = data.world[cf.body].rotate_inv(fe.force);
    f[cf.body].f -= local;
    f[cf.body].n -= cross(Vec2<T>(cf.offset), local);
  }
  for (std::size_t i = nb - 1; i >= 1; --i) {
    const int iv = RobotModel::joint_velocity_index(static_cast<int>(i));
    tau[iv] = f[i].n + T(model.joints[i - 1].armature) * a[iv];
    const Force<T> fp = detail::to_parent(data.rel[i], f[i]);
    f[model.bodies[i].parent].n += fp.n;
    f[model.bodies[i].parent].f += fp.f;
  }
  tau[0] = f[0].f.x;
  tau[1] = f[0].f.y;
  tau[2] = f[0].n;
}

template <typename T>
Vec2<T> frame_position(const RobotModel& model, const KinematicsData<T>& data, int contact) {
  const ContactFrame& cf = model.contacts[contact];
  return data.world[cf.body].act(Vec2<T>(cf.offset));
}

template <typename T>
Vec2<T> frame_velocity(const RobotModel& model, const KinematicsData<T>& data, int contact) {
  const ContactFrame& cf = model.contacts[contact];
  const Motion<T>& m = data.vel[cf.body];
  return data.world[cf.body].rotate(m.v + m.w * perp(Vec2<T>(cf.offset)));
}

/// Classical (world-frame) acceleration of a contact point.
template <typename T>
Vec2<T> frame_acceleration(const RobotModel& model, const KinematicsData<T>& data, int contact) {
  const ContactFrame& cf = model.contacts[contact];
  const Vec2<T> r(cf.offset);
  const Motion<T>& m = data.vel[cf.body];
  const Motion<T>& acc = data.acc[cf.body];
  const Vec2<T> local = acc.v + m.w * perp(m.v) + acc.w * perp(r) - (m.w * m.w) * r;
  return data.world[cf.body].rotate(local);
}

/// World CoM position of body i.
template <typename T>
Vec2<T> body_com_position(const RobotModel& model, const KinematicsData<T>& data, int i) {
  return data.world[i].act(Vec2<T>(model.bodies[i].com));
}

/// World CoM velocity of body i.
template <typename T>
Vec2<T> body_com_velocity(const RobotModel& model, const KinematicsData<T>& data, int i) {
  const Motion<T>& m = data.vel[i];
  return data.world[i].rotate(m.v + m.w * perp(Vec2<T>(model.bodies[i].com)));
}

/// System CoM and its velocity.
template <typename T>
void com_kinematics(const RobotModel& model, const KinematicsData<T>& data, Vec2<T>& com, Vec2<T>& vcom) {
  T mt(0.0);
  com = {T(0.0), T(0.0)};
  vcom = {T(0.0), T(0.0)};
  for (std::size_t i = 0; i < model.bodies.size(); ++i) {
    const T m(model.bodies[i].mass);
    com += m * body_com_position(model, data, static_cast<int>(i));
    vcom += m * body_com_velocity(model, data, static_cast<int>(i));
    mt += m;
  }
  com = (T(1.0) / mt) * com;
  vcom = (T(1.0) / mt) * vcom;
}

/// Centroidal angular momentum k_G and linear momentum l_G.
template <typename T>
void centroidal_momentum(const RobotModel& model, const KinematicsData<T>& data, T& k, Vec2<T>& l) {
  Vec2<T> com, vcom;
  com_kinematics(model, data, com, vcom);
  k = T(0.0);
  l = {T(0.0), T(0.0)};
  for (std::size_t i = 0; i < model.bodies.size(); ++i) {
    const T m(model.bodies[i].mass);
    const Vec2<T> p = body_com_position(model, data, static_cast<int>(i));
    const Vec2<T> pv = m * body_com_velocity(model, data, static_cast<int>(i));
    k += cross(p - com, pv) + T(model.bodies[i].inertia) * data.vel[i].w;
    l += pv;
  }
}

// ---------------------------------------------------------------------------
// dense interfaces (double)

inline std::span<const double> as_span(const VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

inline KinematicsData<double> kinematics(const RobotModel& model, const VectorXd& q, const VectorXd& v) {
  check_dim(q.size(), model.nq(), "configuration");
  check_dim(v.size(), model.nv(), "velocity");
  KinematicsData<double> data;
  const VectorXd a = VectorXd::Zero(model.nv());
  forward_kinematics<double>(model, as_span(q), as_span(v), as_span(a), data);
  return data;
}

/// RNEA with optional contact forces (world frame, one 2-vector per listed contact).
inline VectorXd rnea(const RobotModel& model, const VectorXd& q, const VectorXd& v, const VectorXd& a,
                     const std::vector<int>& contacts = {}, const VectorXd& forces = VectorXd(),
                     bool gravity = true) {
  check_dim(q.size(), model.nq(), "configuration");
  check_dim(v.size(), model.nv(), "velocity");
  check_dim(a.size(), model.nv(), "acceleration");
  check_dim(forces.size(), 2 * static_cast<Eigen::Index>(contacts.size()), "contact forces");
  std::vector<FrameForce<double>> fext(contacts.size());
  for (std::size_t c = 0; c < contacts.size(); ++c) {
    fext[c] = {contacts[c], {forces[2 * c], forces[2 * c + 1]}};
  }
  VectorXd tau(model.nv());
  KinematicsData<double> data;
  rnea<double>(model, as_span(q), as_span(v), as_span(a), fext, gravity,
               {tau.data(), static_cast<std::size_t>(tau.size())}, data);
  return tau;
}

/// h(q, v): Coriolis, centrifugal and gravity terms.
inline VectorXd nonlinear_effects(const RobotModel& model, const VectorXd& q, const VectorXd& v) {
  return rnea(model, q, v, VectorXd::Zero(model.nv()));
}

/// g(q): generalized gravity force.
inline VectorXd generalized_gravity(const RobotModel& model, const VectorXd& q) {
  return rnea(model, q, VectorXd::Zero(model.nv()), VectorXd::Zero(model.nv()));
}

namespace detail {

// 3x3 spatial inertia in (w, vx, vy) coordinates about the body frame origin.
inline Eigen::Matrix3d spatial_inertia(const Body& b) {
  const double m = b.mass, cx = b.com.x(), cy = b.com.y();
  Eigen::Matrix3d I;
  I << b.inertia + m * (cx * cx + cy * cy), -m * cy, m * cx,
       -m * cy, m, 0.0,
       m * cx, 0.0, m;
  return I;
}

// Motion transform (parent coords -> child coords) in (w, vx, vy) coordinates.
inline Eigen::Matrix3d motion_transform(const Pose2<double>& rel) {
  const double c = std::cos(rel.theta), s = std::sin(rel.theta);
  Eigen::Matrix2d Rt;
  Rt << c, s, -s, c;
  Eigen::Matrix3d X = Eigen::Matrix3d::Zero();
  X(0, 0) = 1.0;
  X.block<2, 1>(1, 0) = Rt * Vector2d(-rel.t.y, rel.t.x);
  X.block<2, 2>(1, 1) = Rt;
  return X;
}

// Motion subspace of the base: tangent (vx, vy, w) -> (w, vx, vy).
inline Eigen::Matrix3d base_motion_subspace() {
  Eigen::Matrix3d S = Eigen::Matrix3d::Zero();
  S(0, 2) = 1.0;
  S(1, 0) = 1.0;
  S(2, 1) = 1.0;
  return S;
}

}  // namespace detail

/// Joint-space inertia matrix by the composite rigid body algorithm.
inline MatrixXd mass_matrix(const RobotModel& model, const VectorXd& q) {
  const KinematicsData<double> data = kinematics(model, q, VectorXd::Zero(model.nv()));
  const int nb = static_cast<int>(model.bodies.size());
  const int nv = model.nv();
  std::vector<Eigen::Matrix3d> Ic(nb), X(nb);
  for (int i = 0; i < nb; ++i) {
    Ic[i] = detail::spatial_inertia(model.bodies[i]);
    X[i] = detail::motion_transform(data.rel[i]);
  }
  for (int i = nb - 1; i >= 1; --i) {
    Ic[model.bodies[i].parent] += X[i].transpose() * Ic[i] * X[i];
  }
  auto subspace = [&](int i) -> MatrixXd {
    if (i == 0) return detail::base_motion_subspace();
    return Vector3d(1.0, 0.0, 0.0);
  };
  auto first_dof = [](int i) { return i == 0 ? 0 : RobotModel::joint_velocity_index(i); };

  MatrixXd M = MatrixXd::Zero(nv, nv);
  for (int i = 0; i < nb; ++i) {
    const MatrixXd Si = subspace(i);
    MatrixXd F = Ic[i] * Si;
    const int di = first_dof(i);
    M.block(di, di, Si.cols(), Si.cols()) = Si.transpose() * F;
    int j = i;
    while (model.bodies[j].parent >= 0) {
      F = X[j].transpose() * F;
      j = model.bodies[j].parent;
      const MatrixXd Sj = subspace(j);
      const int dj = first_dof(j);
      M.block(dj, di, Sj.cols(), Si.cols()) = Sj.transpose() * F;
      M.block(di, dj, Si.cols(), Sj.cols()) = M.block(dj, di, Sj.cols(), Si.cols()).transpose();
    }
  }
  for (int j = 0; j < model.nj(); ++j) M(3 + j, 3 + j) += model.joints[j].armature;
  return M;
}

/// Body-coordinate spatial Jacobians (3 x nv, rows w, vx, vy) of every body.
inline std::vector<MatrixXd> body_jacobians(const RobotModel& model, const KinematicsData<double>& data) {
  const int nb = static_cast<int>(model.bodies.size());
  std::vector<MatrixXd> J(nb, MatrixXd::Zero(3, model.nv()));
  J[0].leftCols(3) = detail::base_motion_subspace();
  for (int i = 1; i < nb; ++i) {
    J[i] = detail::motion_transform(data.rel[i]) * J[model.bodies[i].parent];
    J[i](0, RobotModel::joint_velocity_index(i)) += 1.0;
  }
  return J;
}

/// World-frame point Jacobian of a contact frame (2 x nv).
inline MatrixXd frame_jacobian(const RobotModel& model, const KinematicsData<double>& data,
                               const std::vector<MatrixXd>& bodyJ, int contact) {
  const ContactFrame& cf = model.contacts[contact];
  const MatrixXd& Jb = bodyJ[cf.body];
  MatrixXd local = Jb.bottomRows(2);
  local.row(0) += -cf.offset.y() * Jb.row(0);
  local.row(1) += cf.offset.x() * Jb.row(0);
  const double th = data.world[cf.body].theta;
  Eigen::Matrix2d R;
  R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  return R * local;
}

inline void validate_contacts(const RobotModel& model, const std::vector<int>& contacts) {
  for (int c : contacts) {
    if (c < 0 || c >= static_cast<int>(model.contacts.size())) {
      throw UnknownContactFrame("contact frame id " + std::to_string(c) + " does not exist");
    }
  }
}

/// Stacked world-frame contact Jacobian, two rows per point contact.
inline MatrixXd contact_jacobian(const RobotModel& model, const VectorXd& q, const std::vector<int>& contacts) {
  validate_contacts(model, contacts);
  const KinematicsData<double> data = kinematics(model, q, VectorXd::Zero(model.nv()));
  const std::vector<MatrixXd> bodyJ = body_jacobians(model, data);
  MatrixXd J(2 * contacts.size(), model.nv());
  for (std::size_t c = 0; c < contacts.size(); ++c) {
    J.middleRows(2 * c, 2) = frame_jacobian(model, data, bodyJ, contacts[c]);
  }
  return J;
}

/// Jdot * v of the stacked contact points (classical acceleration at zero joint acceleration).
inline VectorXd frame_acceleration_bias(const RobotModel& model, const VectorXd& q, const VectorXd& v,
                                        const std::vector<int>& contacts) {
  validate_contacts(model, contacts);
  const KinematicsData<double> data = kinematics(model, q, v);
  VectorXd out(2 * contacts.size());
  for (std::size_t c = 0; c < contacts.size(); ++c) {
    out.segment<2>(2 * c) = to_eigen(frame_acceleration(model, data, contacts[c]));
  }
  return out;
}

inline Vector2d frame_position(const RobotModel& model, const VectorXd& q, int contact) {
  validate_contacts(model, {contact});
  const KinematicsData<double> data = kinematics(model, q, VectorXd::Zero(model.nv()));
  return to_eigen(frame_position(model, data, contact));
}

inline Vector2d frame_velocity(const RobotModel& model, const VectorXd& q, const VectorXd& v, int contact) {
  validate_contacts(model, {contact});
  const KinematicsData<double> data = kinematics(model, q, v);
  return to_eigen(frame_velocity(model, data, contact));
}

// ---------------------------------------------------------------------------
// exact directional derivatives through dual numbers

/// Seeds q (+) (eps * dq) and v + eps * dv as dual numbers.
inline void seed_duals(const VectorXd& q, const VectorXd& v, const VectorXd& dq, const VectorXd& dv,
                       std::vector<Dual>& qd, std::vector<Dual>& vd) {
  const std::size_t n = static_cast<std::size_t>(q.size());
  std::vector<Dual> q0(n), step(n);
  for (std::size_t i = 0; i < n; ++i) {
    q0[i] = Dual(q[i]);
    step[i] = Dual(0.0, dq[i]);
  }
  qd.resize(n);
  integrate_configuration<Dual>(q0, step, qd);
  vd.resize(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) vd[i] = Dual(v[i], dv[i]);
}

/// Jacobian of a vector function g(q, v) with respect to the tangent (dq, dv).
/// `fn(qd, vd, out)` evaluates g on dual inputs into `out` (size m).
template <typename Fn>
MatrixXd dual_jacobian(const VectorXd& q, const VectorXd& v, int m, Fn&& fn, bool wrt_q = true, bool wrt_v = true) {
  const int nv = static_cast<int>(v.size());
  MatrixXd J = MatrixXd::Zero(m, 2 * nv);
  std::vector<Dual> qd, vd, out(m);
  VectorXd dq = VectorXd::Zero(nv), dv = VectorXd::Zero(nv);
  for (int i = 0; i < 2 * nv; ++i) {
    if (i < nv && !wrt_q) continue;
    if (i >= nv && !wrt_v) continue;
    dq.setZero();
    dv.setZero();
    if (i < nv) dq[i] = 1.0;
    else dv[i - nv] = 1.0;
    seed_duals(q, v, dq, dv, qd, vd);
    fn(qd, vd, out);
    for (int r = 0; r < m; ++r) J(r, i) = out[r].d;
  }
  return J;
}

/// Derivative of a function g(q, v) along the motion q' = v (v held fixed): Jdot-v style terms.
template <typename Fn>
VectorXd dual_drift(const VectorXd& q, const VectorXd& v, int m, Fn&& fn) {
  std::vector<Dual> qd, vd, out(m);
  seed_duals(q, v, v, VectorXd::Zero(v.size()), qd, vd);
  fn(qd, vd, out);
  VectorXd r(m);
  for (int i = 0; i < m; ++i) r[i] = out[i].d;
  return r;
}

}  // namespace fbmpc
