#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fbmpc/common.hpp"
#include "fbmpc/multibody/se2.hpp"

namespace fbmpc {

enum class JointType { FloatingBase, Revolute };

struct Body {
  std::string name;
  double mass = 1.0;
  Vector2d com = Vector2d::Zero();  ///< body frame
  double inertia = 0.0;             ///< about the body CoM
  int parent = -1;
  JointType joint = JointType::Revolute;
  Pose2<double> placement{};  ///< joint frame relative to the parent body frame
};

/// Per actuated joint limits and actuator data. Index j refers to body j+1.
struct JointLimits {
  double torque_lower = -40.0;
  double torque_upper = 40.0;
  double position_lower = -M_PI;
  double position_upper = M_PI;
  double velocity_limit = 20.0;
  double armature = 0.0;  ///< reflected actuator inertia added to the mass matrix diagonal
};

struct ContactFrame {
  std::string name;
  int body = 0;
  Vector2d offset = Vector2d::Zero();
};

/// Planar floating-base kinematic tree. Body 0 is the floating base; every
/// other body hangs from a revolute joint and its parent precedes it.
class RobotModel {
public:
  std::string name = "robot";
  std::vector<Body> bodies;
  std::vector<JointLimits> joints;
  std::vector<ContactFrame> contacts;
  Vector2d gravity{0.0, -9.81};
  VectorXd nominal_posture;  ///< optional reference configuration (nq)

  int nj() const { return static_cast<int>(bodies.size()) - 1; }
  int nq() const { return 3 + nj(); }
  int nv() const { return 3 + nj(); }
  int nu() const { return nj(); }
  int nx() const { return nq() + nv(); }

  /// Velocity index of the revolute joint driving body i (i >= 1).
  static int joint_velocity_index(int body) { return 2 + body; }

  double total_mass() const {
    double m = 0.0;
    for (const auto& b : bodies) m += b.mass;
    return m;
  }

  VectorXd torque_lower() const {
    VectorXd lb(nu());
    for (int j = 0; j < nu(); ++j) lb[j] = joints[j].torque_lower;
    return lb;
  }
  VectorXd torque_upper() const {
    VectorXd ub(nu());
    for (int j = 0; j < nu(); ++j) ub[j] = joints[j].torque_upper;
    return ub;
  }

  int contact_index(const std::string& frame_name) const {
    for (std::size_t i = 0; i < contacts.size(); ++i) {
      if (contacts[i].name == frame_name) return static_cast<int>(i);
    }
    throw UnknownContactFrame("unknown contact frame '" + frame_name + "'");
  }

  int body_index(const std::string& body_name) const {
    for (std::size_t i = 0; i < bodies.size(); ++i) {
      if (bodies[i].name == body_name) return static_cast<int>(i);
    }
    throw InvalidModel("unknown body '" + body_name + "'");
  }

  /// Selection matrix S (nv x nu) mapping joint torques to generalized forces.
  MatrixXd actuation_matrix() const {
    MatrixXd S = MatrixXd::Zero(nv(), nu());
    S.bottomRows(nu()).setIdentity();
    return S;
  }

  VectorXd neutral_configuration() const {
    if (nominal_posture.size() == nq()) return nominal_posture;
    return VectorXd::Zero(nq());
  }

  void validate() const {
    if (bodies.empty()) throw InvalidModel("model has no bodies");
    if (bodies[0].joint != JointType::FloatingBase || bodies[0].parent != -1) {
      throw InvalidModel("body 0 must be the floating base at the root");
    }
    for (std::size_t i = 0; i < bodies.size(); ++i) {
      const Body& b = bodies[i];
      if (!(b.mass > 0.0)) throw InvalidModel("body '" + b.name + "' must have positive mass");
      if (b.inertia < 0.0) throw InvalidModel("body '" + b.name + "' has negative inertia");
      if (i > 0) {
        if (b.joint != JointType::Revolute) throw InvalidModel("only one floating base is allowed");
        if (b.parent < 0 || b.parent >= static_cast<int>(i)) {
          throw InvalidModel("body '" + b.name + "' must have a parent listed before it");
        }
      }
    }
    if (static_cast<int>(joints.size()) != nj()) {
      throw InvalidModel("expected " + std::to_string(nj()) + " joint limit entries");
    }
    for (const auto& j : joints) {
      if (j.torque_lower > j.torque_upper) throw InvalidModel("torque lower limit above upper limit");
      if (j.position_lower > j.position_upper) throw InvalidModel("position lower limit above upper limit");
      if (j.armature < 0.0) throw InvalidModel("negative armature");
    }
    std::set<std::string> names;
    for (const auto& c : contacts) {
      if (c.body < 0 || c.body >= static_cast<int>(bodies.size())) {
        throw InvalidModel("contact '" + c.name + "' references a missing body");
      }
      if (!names.insert(c.name).second) throw InvalidModel("duplicate contact name '" + c.name + "'");
    }
    if (nominal_posture.size() != 0 && nominal_posture.size() != nq()) {
      throw InvalidModel("nominal posture has wrong dimension");
    }
  }
};

}  // namespace fbmpc
