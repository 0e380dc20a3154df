#pragma once

#include "fbmpc/multibody/model.hpp"

namespace fbmpc::robots {

/// Free-floating single rigid body with one contact frame at `contact_offset`.
inline RobotModel single_body(double mass, const Vector2d& com, double inertia,
                              const Vector2d& contact_offset = Vector2d::Zero()) {
  RobotModel m;
  m.name = "single_body";
  m.bodies.push_back({"base", mass, com, inertia, -1, JointType::FloatingBase, {}});
  m.contacts.push_back({"point", 0, contact_offset});
  m.validate();
  return m;
}

/// Floating base with a serial chain of `links` revolute links hanging
/// downwards; a contact frame sits at the tip of the last link.
inline RobotModel serial_chain(int links, double link_length = 0.3, double link_mass = 1.0) {
  RobotModel m;
  m.name = "serial_chain";
  m.bodies.push_back({"base", 3.0, {0.02, -0.01}, 0.05, -1, JointType::FloatingBase, {}});
  for (int i = 0; i < links; ++i) {
    Body b;
    b.name = "link" + std::to_string(i);
    b.mass = link_mass * (1.0 + 0.1 * i);
    b.com = {0.01 * (i + 1), -0.5 * link_length};
    b.inertia = b.mass * link_length * link_length / 12.0;
    b.parent = i;
    b.joint = JointType::Revolute;
    b.placement = {{i == 0 ? 0.05 : 0.0, i == 0 ? 0.0 : -link_length}, 0.0};
    m.bodies.push_back(b);
    m.joints.push_back(JointLimits{});
  }
  m.contacts.push_back({"tip", links, {0.0, -link_length}});
  m.contacts.push_back({"base_point", 0, {0.1, -0.05}});
  m.validate();
  return m;
}

/// Default planar quadruped: a base with four two-link legs (LF, RF, LH, RH).
/// Left and right legs overlap in the sagittal plane. nv = 11, nu = 8.
inline RobotModel planar_quadruped() {
  RobotModel m;
  m.name = "planar_quadruped";
  constexpr double kHip = 0.3;
  constexpr double kLink = 0.25;
  m.bodies.push_back({"base", 20.0, {0.0, 0.0}, 0.65, -1, JointType::FloatingBase, {}});
  const char* legs[4] = {"lf", "rf", "lh", "rh"};
  const double hip_x[4] = {kHip, kHip, -kHip, -kHip};
  for (int l = 0; l < 4; ++l) {
    const int thigh = static_cast<int>(m.bodies.size());
    m.bodies.push_back({std::string(legs[l]) + "_thigh", 1.5, {0.0, -0.5 * kLink}, 1.5 * kLink * kLink / 12.0, 0,
                        JointType::Revolute, {{hip_x[l], 0.0}, 0.0}});
    m.bodies.push_back({std::string(legs[l]) + "_shank", 0.5, {0.0, -0.5 * kLink}, 0.5 * kLink * kLink / 12.0, thigh,
                        JointType::Revolute, {{0.0, -kLink}, 0.0}});
    JointLimits hip, knee;
    hip.position_lower = -1.6;
    hip.position_upper = 1.6;
    knee.position_lower = -2.6;
    knee.position_upper = 2.6;
    m.joints.push_back(hip);
    m.joints.push_back(knee);
    m.contacts.push_back({std::string(legs[l]) + "_foot", thigh + 1, {0.0, -kLink}});
  }
  const double hip_angle = 0.6;
  const double height = 2.0 * kLink * std::cos(hip_angle);
  m.nominal_posture.resize(m.nq());
  m.nominal_posture << 0.0, height, 0.0,
      -hip_angle, 2.0 * hip_angle, -hip_angle, 2.0 * hip_angle,
      hip_angle, -2.0 * hip_angle, hip_angle, -2.0 * hip_angle;
  m.validate();
  return m;
}

}  // namespace fbmpc::robots
