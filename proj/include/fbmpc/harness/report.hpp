#pragma once

#include <cstdio>
#include <ostream>

#include "fbmpc/harness/simulator.hpp"

namespace fbmpc {

namespace detail {

// Shortest text that round-trips the double exactly.
inline std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

/// Column names of the per-tick series, in file order.
inline std::vector<std::string> series_columns(const RobotModel& model) {
  std::vector<std::string> c{"t"};
  const int nu = model.nu(), nq = model.nq(), nv = model.nv();
  for (int j = 0; j < nu; ++j) c.push_back("u_cmd_" + std::to_string(j));
  for (int j = 0; j < nu; ++j) c.push_back("u_meas_" + std::to_string(j));
  for (const char* pre : {"", "ref_"}) {
    for (int i = 0; i < nq; ++i) c.push_back(std::string("q_") + pre + std::to_string(i));
    for (int i = 0; i < nv; ++i) c.push_back(std::string("v_") + pre + std::to_string(i));
  }
  c.push_back("k_G");
  c.push_back("k_G_ref");
  for (const char* pre : {"lambda_", "lambda_ref_"}) {
    for (const auto& f : model.contacts) {
      c.push_back(pre + f.name + "_x");
      c.push_back(pre + f.name + "_y");
    }
  }
  for (const auto& f : model.contacts) c.push_back("contact_" + f.name);
  for (const auto& f : model.contacts) c.push_back("planned_" + f.name);
  for (const char* s : {"com_x", "com_y", "com_ref_x", "com_ref_y", "degraded", "fallback"}) c.push_back(s);
  return c;
}

inline void write_series_csv(std::ostream& os, const RobotModel& model, const SimResult& r) {
  const auto cols = series_columns(model);
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  using detail::fmt_double;
  for (const TickRecord& k : r.ticks) {
    std::string line = fmt_double(k.t);
    auto put = [&](double v) {
      line += ',';
      line += fmt_double(v);
    };
    auto put_vec = [&](const VectorXd& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) put(v[i]);
    };
    put_vec(k.u_cmd);
    put_vec(k.u_meas);
    put_vec(k.x);
    put_vec(k.x_ref);
    put(k.k);
    put(k.k_ref);
    put_vec(k.lambda);
    put_vec(k.lambda_ref);
    for (int c : k.contact) line += c ? ",1" : ",0";
    for (int c : k.planned) line += c ? ",1" : ",0";
    put(k.com.x());
    put(k.com.y());
    put(k.com_ref.x());
    put(k.com_ref.y());
    line += k.degraded ? ",1" : ",0";
    line += k.fallback ? ",1" : ",0";
    os << line << '\n';
  }
}

inline Json metrics_json(const SimMetrics& m) {
  Json j;
  j["ticks"] = m.ticks;
  j["torque_violations"] = m.torque_violations;
  j["solver_torque_violations"] = m.solver_torque_violations;
  j["max_torque_excess"] = m.max_torque_excess;
  j["max_com_drift"] = m.max_com_drift;
  j["max_com_error"] = m.max_com_error;
  j["max_joint_error"] = m.max_joint_error;
  j["momentum_error_integral"] = m.momentum_error_integral;
  j["flights"] = m.flights;
  j["jumps_completed"] = m.jumps_completed;
  Json rec = Json::array();
  for (double t : m.push_recovery) rec.push_back(std::isfinite(t) ? Json(t) : Json(nullptr));
  j["push_recovery"] = rec;
  j["degraded_messages"] = m.degraded_messages;
  j["held_ticks"] = m.held_ticks;
  j["fallback_ticks"] = m.fallback_ticks;
  j["slip_ticks"] = m.slip_ticks;
  j["min_base_height"] = m.min_base_height;
  return j;
}

/// Deterministic run summary (no wall-clock data).
inline Json summary_json(const SimResult& r) {
  Json j;
  j["scenario"] = r.scenario;
  j["controller"] = to_string(r.controller);
  j["aborted"] = r.aborted;
  j["metrics"] = metrics_json(r.metrics);
  Json checks = Json::array();
  for (const CheckResult& c : r.checks) {
    checks.push_back({{"name", c.name},
                      {"value", std::isfinite(c.value) ? Json(c.value) : Json(nullptr)},
                      {"threshold", c.threshold},
                      {"pass", c.pass}});
  }
  j["checks"] = checks;
  Json events = Json::array();
  for (const auto& e : r.events) {
    events.push_back({{"t", e.time}, {"foot", r.foot_names.at(e.foot)}, {"kind", e.touchdown ? "touchdown" : "liftoff"}});
  }
  j["contact_events"] = events;
  return j;
}

}  // namespace fbmpc
