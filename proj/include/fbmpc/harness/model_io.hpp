#pragma once

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "fbmpc/multibody/model.hpp"

namespace fbmpc {

using Json = nlohmann::ordered_json;

namespace io {

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidConfig("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

/// Rejects keys outside `allowed` so that typos in config files surface.
inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidConfig(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw InvalidConfig("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
T get(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw InvalidConfig("missing key '" + std::string(key) + "' in " + where);
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw InvalidConfig("key '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

inline VectorXd get_vector(const Json& j, const char* key, const std::string& where, Eigen::Index size = -1) {
  const auto v = get<std::vector<double>>(j, key, where);
  if (size >= 0 && static_cast<Eigen::Index>(v.size()) != size) {
    throw InvalidConfig("'" + std::string(key) + "' in " + where + " needs " + std::to_string(size) + " entries");
  }
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Vector2d get_vec2(const Json& j, const char* key, const std::string& where) {
  return get_vector(j, key, where, 2);
}

inline Json vec_json(const VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace io

// Model file:
//   { "name", "gravity": [gx, gy],
//     "bodies": [{ "name", "mass", "com": [x, y], "inertia", "parent": name|null,
//                  "placement": { "xy": [x, y], "theta" } }],           // body 0 is the floating base
//     "joints": [{ "torque": [lo, hi], "position": [lo, hi], "velocity_limit", "armature" }],
//     "contacts": [{ "name", "body", "offset": [x, y] }],
//     "nominal_posture": [nq] }

inline RobotModel model_from_json(const Json& j) {
  using namespace io;
  check_keys(j, {"name", "gravity", "bodies", "joints", "contacts", "nominal_posture"}, "model");
  RobotModel m;
  m.name = get_or<std::string>(j, "name", "robot", "model");
  if (j.contains("gravity")) m.gravity = get_vec2(j, "gravity", "model");
  const Json& bodies = j.at("bodies");
  if (!bodies.is_array() || bodies.empty()) throw InvalidModel("model needs a non-empty 'bodies' array");
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    const Json& b = bodies[i];
    const std::string where = "body " + std::to_string(i);
    check_keys(b, {"name", "mass", "com", "inertia", "parent", "placement"}, where);
    Body body;
    body.name = get<std::string>(b, "name", where);
    body.mass = get<double>(b, "mass", where);
    body.com = b.contains("com") ? get_vec2(b, "com", where) : Vector2d::Zero();
    body.inertia = get<double>(b, "inertia", where);
    if (i == 0) {
      if (b.contains("parent") && !b.at("parent").is_null()) throw InvalidModel("the first body is the floating base");
      body.joint = JointType::FloatingBase;
      body.parent = -1;
    } else {
      body.joint = JointType::Revolute;
      body.parent = m.body_index(get<std::string>(b, "parent", where));
      if (b.contains("placement")) {
        const Json& p = b.at("placement");
        check_keys(p, {"xy", "theta"}, where + " placement");
        const Vector2d xy = get_vec2(p, "xy", where + " placement");
        body.placement = {{xy.x(), xy.y()}, get_or<double>(p, "theta", 0.0, where + " placement")};
      }
    }
    m.bodies.push_back(body);
  }
  const Json& joints = j.contains("joints") ? j.at("joints") : Json::array();
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const Json& jl = joints[i];
    const std::string where = "joint " + std::to_string(i);
    check_keys(jl, {"torque", "position", "velocity_limit", "armature"}, where);
    JointLimits l;
    if (jl.contains("torque")) {
      const Vector2d t = get_vec2(jl, "torque", where);
      l.torque_lower = t[0];
      l.torque_upper = t[1];
    }
    if (jl.contains("position")) {
      const Vector2d p = get_vec2(jl, "position", where);
      l.position_lower = p[0];
      l.position_upper = p[1];
    }
    l.velocity_limit = get_or<double>(jl, "velocity_limit", l.velocity_limit, where);
    l.armature = get_or<double>(jl, "armature", l.armature, where);
    m.joints.push_back(l);
  }
  const Json& contacts = j.contains("contacts") ? j.at("contacts") : Json::array();
  for (std::size_t i = 0; i < contacts.size(); ++i) {
    const Json& c = contacts[i];
    const std::string where = "contact " + std::to_string(i);
    check_keys(c, {"name", "body", "offset"}, where);
    m.contacts.push_back({get<std::string>(c, "name", where), m.body_index(get<std::string>(c, "body", where)),
                          get_vec2(c, "offset", where)});
  }
  if (j.contains("nominal_posture")) m.nominal_posture = get_vector(j, "nominal_posture", "model");
  m.validate();
  return m;
}

inline Json model_to_json(const RobotModel& m) {
  using io::vec_json;
  Json j;
  j["name"] = m.name;
  j["gravity"] = vec_json(m.gravity);
  j["bodies"] = Json::array();
  for (std::size_t i = 0; i < m.bodies.size(); ++i) {
    const Body& b = m.bodies[i];
    Json jb;
    jb["name"] = b.name;
    jb["mass"] = b.mass;
    jb["com"] = vec_json(b.com);
    jb["inertia"] = b.inertia;
    if (i == 0) {
      jb["parent"] = nullptr;
    } else {
      jb["parent"] = m.bodies[b.parent].name;
      jb["placement"] = {{"xy", {b.placement.t.x, b.placement.t.y}}, {"theta", b.placement.theta}};
    }
    j["bodies"].push_back(jb);
  }
  j["joints"] = Json::array();
  for (const JointLimits& l : m.joints) {
    j["joints"].push_back({{"torque", {l.torque_lower, l.torque_upper}},
                           {"position", {l.position_lower, l.position_upper}},
                           {"velocity_limit", l.velocity_limit},
                           {"armature", l.armature}});
  }
  j["contacts"] = Json::array();
  for (const ContactFrame& c : m.contacts) {
    j["contacts"].push_back({{"name", c.name}, {"body", m.bodies[c.body].name}, {"offset", vec_json(c.offset)}});
  }
  if (m.nominal_posture.size()) j["nominal_posture"] = vec_json(m.nominal_posture);
  return j;
}

inline RobotModel load_model(const std::filesystem::path& path) {
  return model_from_json(io::read_json_file(path));
}

}  // namespace fbmpc
