#pragma once

#include <json.hpp>

#include "fbmpc/boxfddp/solver.hpp"
#include "fbmpc/ocp/legged.hpp"

namespace fbmpc {

struct SolverDiagnostics {
  std::string status = "iterating";
  int iterations = 0;
  double cost = 0.0;
  double gap = 0.0;
  double mu = 0.0;
  double qu_norm = 0.0;
  bool degraded = false;
  int updated_nodes = 0;  ///< nodes whose references changed in this step
};

/// Local policy sent from the MPC to the tracking controller. Entry i
/// describes node i of the horizon: xs_ref has one more entry than the
/// per-node vectors (the state at the end of the window).
struct PolicyMessage {
  double stamp = 0.0;
  std::vector<double> node_times;  ///< size n + 1
  std::vector<NodeKind> kinds;     ///< size n
  std::vector<double> dts;         ///< size n, 0 for impulse nodes
  std::vector<VectorXd> xs_ref;    ///< size n + 1
  std::vector<VectorXd> us_ff;     ///< size n, empty for impulse nodes
  std::vector<MatrixXd> K_gains;   ///< size n, nu x 2nv; u = u_ff + K (x* (-) x)
  std::vector<VectorXd> forces;    ///< size n, contact forces (impulses on impulse nodes)
  std::vector<std::vector<int>> contacts;  ///< size n
  SolverDiagnostics diagnostics;

  int size() const { return static_cast<int>(kinds.size()); }
  bool empty() const { return kinds.empty(); }

  void validate() const {
    const std::size_t n = kinds.size();
    if (node_times.size() != n + 1 || xs_ref.size() != n + 1 || dts.size() != n || us_ff.size() != n ||
        K_gains.size() != n || forces.size() != n || contacts.size() != n) {
      throw DimensionMismatch("policy message fields have inconsistent lengths");
    }
  }

  /// Index of the running node active at time t (last node starting at or before t).
  int node_at(double t) const {
    int idx = 0;
    for (int i = 0; i < size(); ++i) {
      if (kinds[i] != NodeKind::Running) continue;
      if (node_times[i] <= t + 1e-12) idx = i;
      else break;
    }
    return idx;
  }
};

namespace detail {

inline nlohmann::ordered_json to_json(const VectorXd& v) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

inline nlohmann::ordered_json to_json(const MatrixXd& m) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(to_json(VectorXd(m.row(r).transpose())));
  return j;
}

inline VectorXd vector_from_json(const nlohmann::ordered_json& j) {
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

inline MatrixXd matrix_from_json(const nlohmann::ordered_json& j, Eigen::Index cols) {
  MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = vector_from_json(j[r]).transpose();
  return m;
}

inline NodeKind node_kind_from_string(const std::string& s) {
  if (s == "running") return NodeKind::Running;
  if (s == "impulse") return NodeKind::Impulse;
  if (s == "terminal") return NodeKind::Terminal;
  throw InvalidConfig("unknown node kind '" + s + "'");
}

}  // namespace detail

/// Fixed field order; doubles are written with full 64-bit precision.
inline nlohmann::ordered_json to_json(const PolicyMessage& m) {
  m.validate();
  nlohmann::ordered_json j;
  j["stamp"] = m.stamp;
  j["node_times"] = m.node_times;
  nlohmann::ordered_json kinds = nlohmann::ordered_json::array();
  for (NodeKind k : m.kinds) kinds.push_back(to_string(k));
  j["kinds"] = kinds;
  j["dts"] = m.dts;
  auto list = [](const auto& xs) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (const auto& x : xs) a.push_back(detail::to_json(x));
    return a;
  };
  j["xs_ref"] = list(m.xs_ref);
  j["us_ff"] = list(m.us_ff);
  j["K_gains"] = list(m.K_gains);
  j["forces"] = list(m.forces);
  j["contacts"] = m.contacts;
  const SolverDiagnostics& d = m.diagnostics;
  j["diagnostics"] = {{"status", d.status},   {"iterations", d.iterations}, {"cost", d.cost},
                      {"gap", d.gap},         {"mu", d.mu},                 {"qu_norm", d.qu_norm},
                      {"degraded", d.degraded}, {"updated_nodes", d.updated_nodes}};
  return j;
}

inline PolicyMessage policy_from_json(const nlohmann::ordered_json& j) {
  PolicyMessage m;
  m.stamp = j.at("stamp").get<double>();
  m.node_times = j.at("node_times").get<std::vector<double>>();
  for (const auto& k : j.at("kinds")) m.kinds.push_back(detail::node_kind_from_string(k.get<std::string>()));
  m.dts = j.at("dts").get<std::vector<double>>();
  for (const auto& x : j.at("xs_ref")) m.xs_ref.push_back(detail::vector_from_json(x));
  for (const auto& u : j.at("us_ff")) m.us_ff.push_back(detail::vector_from_json(u));
  // planar floating base: nq = nv, so the tangent size equals the state size
  const Eigen::Index ndx = m.xs_ref.empty() ? 0 : m.xs_ref[0].size();
  for (const auto& K : j.at("K_gains")) m.K_gains.push_back(detail::matrix_from_json(K, ndx));
  for (const auto& f : j.at("forces")) m.forces.push_back(detail::vector_from_json(f));
  m.contacts = j.at("contacts").get<std::vector<std::vector<int>>>();
  const auto& d = j.at("diagnostics");
  m.diagnostics.status = d.at("status").get<std::string>();
  m.diagnostics.iterations = d.at("iterations").get<int>();
  m.diagnostics.cost = d.at("cost").get<double>();
  m.diagnostics.gap = d.at("gap").get<double>();
  m.diagnostics.mu = d.at("mu").get<double>();
  m.diagnostics.qu_norm = d.at("qu_norm").get<double>();
  m.diagnostics.degraded = d.at("degraded").get<bool>();
  m.diagnostics.updated_nodes = d.at("updated_nodes").get<int>();
  m.validate();
  return m;
}

}  // namespace fbmpc
