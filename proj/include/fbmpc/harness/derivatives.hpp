#pragma once

#include <chrono>
#include <map>
#include <random>

#include "fbmpc/multibody/state.hpp"
#include "fbmpc/ocp/finite_diff.hpp"
#include "fbmpc/ocp/legged.hpp"

namespace fbmpc {

/// Worst relative error of one derivative block over all samples,
/// |analytic - fd|_inf / max(1, |fd|_inf).
struct DerivativeBlock {
  std::string name;
  double max_rel_err = 0.0;
  int samples = 0;
};

struct DerivativeReport {
  std::vector<DerivativeBlock> blocks;
  int samples = 0;
  int zero_velocity_samples = 0;
  double tolerance = 1e-4;
  double seconds = 0.0;

  bool pass() const {
    return std::all_of(blocks.begin(), blocks.end(), [&](const auto& b) { return b.max_rel_err < tolerance; });
  }
};

namespace detail {

inline double block_rel_err(const MatrixXd& a, const MatrixXd& fd) {
  if (a.size() == 0 && fd.size() == 0) return 0.0;
  return inf_norm(MatrixXd(a - fd)) / std::max(1.0, inf_norm(fd));
}

/// Central differences of f(q, v) over the tangent state (dq, dv).
template <typename Fn>
MatrixXd fd_state(const MultibodyStateSpace& S, const VectorXd& x, Fn&& f, double eps = 1e-6) {
  const int ndx = S.ndx();
  const VectorXd f0 = f(x);
  MatrixXd J(f0.size(), ndx);
  for (int i = 0; i < ndx; ++i) {
    VectorXd dx = VectorXd::Zero(ndx);
    dx[i] = eps;
    J.col(i) = (f(S.integrate(x, dx)) - f(S.integrate(x, -dx))) / (2.0 * eps);
  }
  return J;
}

template <typename Fn>
MatrixXd fd_vector(const VectorXd& u, Fn&& f, double eps = 1e-6) {
  const VectorXd f0 = f(u);
  MatrixXd J(f0.size(), u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    VectorXd up = u, um = u;
    up[i] += eps;
    um[i] -= eps;
    J.col(i) = (f(up) - f(um)) / (2.0 * eps);
  }
  return J;
}

}  // namespace detail

/// Finite-difference audit of every analytical derivative: contact and
/// impulse dynamics, and the step maps and cost gradients of running,
/// impulse and terminal nodes. Every fourth sample has zero velocity.
inline DerivativeReport check_derivatives(const RobotModel& model, std::uint64_t seed, int samples,
                                          double tolerance = 1e-4) {
  const auto wall0 = std::chrono::steady_clock::now();
  if (samples < 1) throw InvalidConfig("need at least one derivative sample");
  DerivativeReport rep;
  rep.tolerance = tolerance;
  std::map<std::string, DerivativeBlock> blocks;
  auto note = [&](const std::string& name, const MatrixXd& a, const MatrixXd& fd) {
    DerivativeBlock& b = blocks[name];
    b.name = name;
    b.max_rel_err = std::max(b.max_rel_err, detail::block_rel_err(a, fd));
    ++b.samples;
  };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  auto randn = [&](Eigen::Index n, double s) {
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = s * normal(rng);
    return v;
  };

  const int nq = model.nq(), nv = model.nv(), nu = model.nu();
  const int nc = static_cast<int>(model.contacts.size());
  const MultibodyStateSpace S(model);
  const VectorXd q0 = model.neutral_configuration();
  VectorXd x_nominal = VectorXd::Zero(model.nx());
  x_nominal.head(nq) = q0;

  // a one-step schedule so every node kind (running with swing, impulse, terminal) appears
  ContactSchedule sched = standing_schedule(model, q0, 1.0);
  if (nc > 0) sched.feet[0].phases.push_back({0.05, 0.05, sched.feet[0].initial_placement + Vector2d(0.05, 0.0), 0.05});
  CostWeights w;
  w.quasi_static = 1e-2;
  w.force = Vector2d(1e-3, 2e-3);
  ProblemOptions popt;
  popt.cone.mu = 0.5;
  popt.restitution = 0.2;
  const LeggedProblem lp = build_problem(model, sched, w, x_nominal, 20, 0.01, 0.0, popt);

  for (int k = 0; rep.samples < samples; ++k) {
    if (k > 10 * samples) throw InvalidConfig("too many singular derivative samples");
    const bool still = k % 4 == 0;
    VectorXd dx(2 * nv);
    dx << randn(nv, 0.2), still ? VectorXd(VectorXd::Zero(nv)) : randn(nv, 1.0);
    const VectorXd x = S.integrate(x_nominal, dx);
    const VectorXd q = x.head(nq), v = x.tail(nv);
    const VectorXd u = randn(nu, 10.0);

    // random nonempty contact subset with anchors near the feet
    ContactSet cs;
    for (int f = 0; f < nc; ++f) {
      if (uniform(rng) < 0.5) cs.frames.push_back(f);
    }
    if (cs.frames.empty() && nc > 0) cs.frames.push_back(static_cast<int>(k % nc));
    if (k % 2) {
      for (int f : cs.frames) cs.anchors.push_back(frame_position(model, q, f) + randn(2, 0.01));
    }

    try {
      const ContactSolution sol = contact_forward_dynamics(model, q, v, u, cs);
      const DynamicsDerivatives d = contact_dynamics_derivatives(model, q, v, u, cs, sol);
      auto acc = [&](const VectorXd& xx, const VectorXd& uu) {
        return contact_forward_dynamics(model, xx.head(nq), xx.tail(nv), uu, cs);
      };
      note("contact.fx", d.fx, detail::fd_state(S, x, [&](const VectorXd& xx) { return VectorXd(acc(xx, u).acceleration); }));
      note("contact.lx", d.lx, detail::fd_state(S, x, [&](const VectorXd& xx) { return VectorXd(acc(xx, u).forces); }));
      note("contact.fu", d.fu, detail::fd_vector(u, [&](const VectorXd& uu) { return VectorXd(acc(x, uu).acceleration); }));
      note("contact.lu", d.lu, detail::fd_vector(u, [&](const VectorXd& uu) { return VectorXd(acc(x, uu).forces); }));

      const double e = uniform(rng);
      ContactSet ci;
      ci.frames = cs.frames;
      const ImpulseSolution isol = impulse_dynamics(model, q, v, ci, e);
      const DynamicsDerivatives di = impulse_dynamics_derivatives(model, q, v, ci, isol);
      auto imp = [&](const VectorXd& xx) { return impulse_dynamics(model, xx.head(nq), xx.tail(nv), ci, e); };
      note("impulse.fx", di.fx, detail::fd_state(S, x, [&](const VectorXd& xx) { return VectorXd(imp(xx).post_velocity); }));
      note("impulse.lx", di.lx, detail::fd_state(S, x, [&](const VectorXd& xx) { return VectorXd(imp(xx).impulses); }));
    } catch (const RankDeficientContacts&) {
      // singular leg configurations are skipped; they do not count as samples
      continue;
    }

    // node step maps and cost gradients, cycling through the node kinds
    const ShootingProblem& P = *lp.problem;
    std::vector<int> idx;
    for (int i = 0; i < P.size(); ++i) {
      const auto& spec = lp.specs[i];
      if (spec.kind == NodeKind::Impulse || (!spec.swing.empty() && idx.size() < 2) || i == 0) idx.push_back(i);
    }
    for (int i : idx) {
      const ActionModel& node = P.running(i);
      const VectorXd un = node.nu() ? randn(node.nu(), 10.0) : VectorXd();
      const std::string kind = to_string(lp.specs[i].kind);
      auto data = node.create_data();
      node.calc(*data, x, un);
      node.calc_diff(*data, x, un);
      const NodeDerivatives fd = finite_difference_node(node, x, un);
      note(kind + ".Fx", data->Fx, fd.Fx);
      note(kind + ".Lx", data->Lx.transpose(), fd.Lx.transpose());
      if (node.nu()) {
        note(kind + ".Fu", data->Fu, fd.Fu);
        note(kind + ".Lu", data->Lu.transpose(), fd.Lu.transpose());
      }
    }
    const ActionModel& term = P.terminal();
    auto td = term.create_data();
    term.calc(*td, x, VectorXd());
    term.calc_diff(*td, x, VectorXd());
    note("terminal.Lx", td->Lx.transpose(), finite_difference_node(term, x, VectorXd()).Lx.transpose());
    ++rep.samples;
    rep.zero_velocity_samples += still;
  }
  for (auto& [name, b] : blocks) rep.blocks.push_back(b);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return rep;
}

}  // namespace fbmpc
