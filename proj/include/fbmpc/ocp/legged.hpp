#pragma once

#include <cmath>

#include "fbmpc/ocp/action.hpp"
#include "fbmpc/ocp/costs.hpp"
#include "fbmpc/ocp/schedule.hpp"

namespace fbmpc {

enum class NodeKind { Running, Impulse, Terminal };

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Running: return "running";
    case NodeKind::Impulse: return "impulse";
    case NodeKind::Terminal: return "terminal";
  }
  return "?";
}

/// Diagonal regularization weights and penalty weights. Empty vectors take
/// defaults sized from the model (see resolve()).
struct CostWeights {
  VectorXd posture;   ///< Q, nv
  VectorXd velocity;  ///< N, nv
  VectorXd control;   ///< R, nu
  Vector2d force{1e-5, 1e-5};  ///< K per contact (world x, world y)
  double quasi_static = 0.0;   ///< multiplier on N for the quasi-static torque residual
  double cone = 1e2;
  double placement = 1e4;
  double touchdown_placement = 1e6;
  double contact_velocity = 1e3;
  double state_bounds = 1e3;
  double terminal = 10.0;
  VectorXd q_ref;

  void resolve(const RobotModel& model) {
    const int nv = model.nv(), nu = model.nu();
    if (posture.size() == 0) {
      posture = VectorXd::Constant(nv, 1.0);
      posture.head<3>() << 0.0, 100.0, 100.0;
    }
    if (velocity.size() == 0) {
      velocity = VectorXd::Constant(nv, 0.1);
      velocity.head<3>().setConstant(1.0);
    }
    if (control.size() == 0) control = VectorXd::Constant(nu, 1e-3);
    if (q_ref.size() == 0) q_ref = model.neutral_configuration();
    check_dim(posture.size(), nv, "posture weights");
    check_dim(velocity.size(), nv, "velocity weights");
    check_dim(control.size(), nu, "control weights");
    check_dim(q_ref.size(), model.nq(), "reference posture");
    auto nonneg = [](const VectorXd& w) { return w.size() == 0 || w.minCoeff() >= 0.0; };
    if (!nonneg(posture) || !nonneg(velocity) || !nonneg(control) || force.minCoeff() < 0.0 || quasi_static < 0.0 ||
        cone < 0.0 || placement < 0.0 || touchdown_placement < 0.0 || contact_velocity < 0.0 || state_bounds < 0.0 ||
        terminal < 0.0) {
      throw InvalidConfig("cost weights must be >= 0");
    }
  }
};

/// Joint position/velocity box used by the state-bounds penalty (base unbounded).
struct StateBounds {
  VectorXd q_lower, q_upper, v_limit;

  static StateBounds from_model(const RobotModel& model) {
    StateBounds b;
    const int nj = model.nj();
    b.q_lower.resize(nj);
    b.q_upper.resize(nj);
    b.v_limit.resize(nj);
    for (int j = 0; j < nj; ++j) {
      b.q_lower[j] = model.joints[j].position_lower;
      b.q_upper[j] = model.joints[j].position_upper;
      b.v_limit[j] = model.joints[j].velocity_limit;
    }
    return b;
  }
};

/// Everything that distinguishes one node of the legged problem.
struct NodeSpec {
  NodeKind kind = NodeKind::Running;
  double time = 0.0;
  double dt = 0.0;
  ContactSet contacts;
  std::vector<int> swing;
  std::vector<SwingReference> swing_refs;
  std::vector<int> touchdown;  ///< impulse nodes: frames gaining contact
  std::vector<SwingReference> touchdown_refs;

  bool operator==(const NodeSpec& o) const {
    auto same_refs = [](const std::vector<SwingReference>& a, const std::vector<SwingReference>& b) {
      if (a.size() != b.size()) return false;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].position != b[i].position || a[i].velocity != b[i].velocity) return false;
      }
      return true;
    };
    return kind == o.kind && time == o.time && dt == o.dt && contacts.frames == o.contacts.frames &&
           contacts.anchors == o.contacts.anchors && swing == o.swing && same_refs(swing_refs, o.swing_refs) &&
           touchdown == o.touchdown && same_refs(touchdown_refs, o.touchdown_refs);
  }
};

struct LeggedData : ActionData {
  ContactSolution contact;
  ImpulseSolution impulse;
  DynamicsDerivatives derivatives;
  VectorXd lambda;  ///< contact forces (running) or impulses (impulse node)
  CostAccumulator acc;
};

/// Shared, immutable ingredients of every node.
struct LeggedContext {
  std::shared_ptr<const RobotModel> model;
  std::shared_ptr<const MultibodyStateSpace> state;
  CostWeights weights;
  ConeMatrices cone;
  StateBounds bounds;
  double restitution = 0.0;
};

/// Node of the hybrid problem: integrated contact dynamics (semi-implicit
/// Euler), an impulse transition, or the terminal cost.
class LeggedAction final : public ActionModel {
public:
  LeggedAction(std::shared_ptr<const LeggedContext> ctx, NodeSpec spec)
      : ActionModel(ctx->state, spec.kind == NodeKind::Running ? ctx->model->nu() : 0), ctx_(std::move(ctx)) {
    set_spec(std::move(spec));
  }

  const NodeSpec& spec() const { return spec_; }
  const LeggedContext& context() const { return *ctx_; }

  /// Updates references in place; the control dimension follows the kind.
  void set_spec(NodeSpec spec) {
    spec_ = std::move(spec);
    if (spec_.kind == NodeKind::Running && !(spec_.dt > 0.0)) throw InvalidConfig("running node needs dt > 0");
    if (spec_.kind != NodeKind::Running) spec_.dt = 0.0;
    nu_ = spec_.kind == NodeKind::Running ? ctx_->model->nu() : 0;
    if (nu_ > 0) {
      u_lower = ctx_->model->torque_lower();
      u_upper = ctx_->model->torque_upper();
    } else {
      u_lower.resize(0);
      u_upper.resize(0);
    }
  }

  std::unique_ptr<ActionData> create_data() const override {
    auto d = std::make_unique<LeggedData>();
    d->resize(state_->nx(), state_->ndx(), nu_);
    ++node_allocation_counter();
    return d;
  }

  void calc(ActionData& base, const VectorXd& x, const VectorXd& u) const override {
    LeggedData& d = static_cast<LeggedData&>(base);
    ensure_sizes(d);
    evaluate(d, x, u, false);
  }

  void calc_diff(ActionData& base, const VectorXd& x, const VectorXd& u) const override {
    LeggedData& d = static_cast<LeggedData&>(base);
    ensure_sizes(d);
    evaluate(d, x, u, true);
  }

private:
  void ensure_sizes(LeggedData& d) const {
    if (d.Lu.size() != nu_) d.resize(state_->nx(), state_->ndx(), nu_);
  }

  void evaluate(LeggedData& d, const VectorXd& x, const VectorXd& u, bool derivs) const {
    const RobotModel& model = *ctx_->model;
    const int nq = model.nq(), nv = model.nv(), ndx = 2 * nv;
    check_dim(x.size(), nq + nv, "state");
    check_dim(u.size(), nu_, "control");
    const VectorXd q = x.head(nq), v = x.tail(nv);
    d.acc.reset(ndx, nu_, derivs);

    if (spec_.kind == NodeKind::Running) {
      if (!derivs) {
        d.contact = contact_forward_dynamics(model, q, v, u, spec_.contacts);
        d.lambda = d.contact.forces;
        const double dt = spec_.dt;
        const VectorXd v1 = v + dt * d.contact.acceleration;
        d.xnext.head(nq) = ctx_->state->integrate_velocity(q, v1, dt);
        d.xnext.tail(nv) = v1;
      } else {
        d.derivatives = contact_dynamics_derivatives(model, q, v, u, spec_.contacts, d.contact);
        const double dt = spec_.dt;
        const VectorXd v1 = v + dt * d.contact.acceleration;
        VectorXd step = VectorXd::Zero(ndx);
        step.head(nv) = dt * v1;
        MatrixXd Jx, Jdx;
        ctx_->state->jintegrate(x, step, &Jx, &Jdx);
        MatrixXd dv1_dx = dt * d.derivatives.fx;
        dv1_dx.rightCols(nv).diagonal().array() += 1.0;
        const MatrixXd dv1_du = dt * d.derivatives.fu;
        const MatrixXd Jw = Jdx.topLeftCorner(nv, nv);
        d.Fx.setZero();
        d.Fx.topLeftCorner(nv, nv) = Jx.topLeftCorner(nv, nv);
        d.Fx.topRows(nv) += dt * Jw * dv1_dx;
        d.Fx.bottomRows(nv) = dv1_dx;
        d.Fu.topRows(nv) = dt * Jw * dv1_du;
        d.Fu.bottomRows(nv) = dv1_du;
      }
      running_costs(d, q, v, u, derivs);
    } else if (spec_.kind == NodeKind::Impulse) {
      if (!derivs) {
        d.impulse = impulse_dynamics(model, q, v, spec_.contacts, ctx_->restitution);
        d.lambda = d.impulse.impulses;
        d.xnext.head(nq) = q;
        d.xnext.tail(nv) = d.impulse.post_velocity;
      } else {
        d.derivatives = impulse_dynamics_derivatives(model, q, v, spec_.contacts, d.impulse);
        d.Fx.setZero();
        d.Fx.topLeftCorner(nv, nv).setIdentity();
        d.Fx.bottomRows(nv) = d.derivatives.fx;
      }
      impulse_costs(d, q, v, derivs);
    } else {
      d.xnext = x;
      state_costs(d, q, v, ctx_->weights.terminal, derivs);
    }

    d.cost = d.acc.value;
    if (derivs) {
      d.Lx = d.acc.Lx;
      d.Lxx = d.acc.Lxx;
      d.Lu = d.acc.Lu;
      d.Lxu = d.acc.Lxu;
      d.Luu = d.acc.Luu;
    }
  }

  // posture, velocity and joint bounds, scaled by `scale`
  void state_costs(LeggedData& d, const VectorXd& q, const VectorXd& v, double scale, bool derivs) const {
    const RobotModel& model = *ctx_->model;
    const CostWeights& w = ctx_->weights;
    const int nv = model.nv(), ndx = 2 * nv, nj = model.nj();
    VectorXd r_q(nv);
    difference_configuration<double>(as_span(q), as_span(w.q_ref), {r_q.data(), static_cast<std::size_t>(nv)});
    MatrixXd Rx;
    if (derivs) {
      VectorXd xa(2 * nv), xb(2 * nv);
      xa << q, VectorXd::Zero(nv);
      xb << w.q_ref, VectorXd::Zero(nv);
      MatrixXd J1;
      ctx_->state->jdifference(xa, xb, &J1, nullptr);
      Rx = MatrixXd::Zero(nv, ndx);
      Rx.leftCols(nv) = J1.topLeftCorner(nv, nv);
    }
    d.acc.add(scale * w.posture, r_q, Rx);
    if (derivs) {
      Rx.setZero(nv, ndx);
      Rx.rightCols(nv).setIdentity();
    }
    d.acc.add(scale * w.velocity, v, Rx);

    if (w.state_bounds > 0.0 && nj > 0) {
      const StateBounds& b = ctx_->bounds;
      const VectorXd qj = q.tail(nj), vj = v.tail(nj);
      VectorXd r(2 * nj);
      r.head(nj) = qj - qj.cwiseMax(b.q_lower).cwiseMin(b.q_upper);
      r.tail(nj) = vj - vj.cwiseMax(-b.v_limit).cwiseMin(b.v_limit);
      if (r.squaredNorm() > 0.0 || derivs) {
        MatrixXd Rb;
        if (derivs) {
          Rb = MatrixXd::Zero(2 * nj, ndx);
          for (int j = 0; j < nj; ++j) {
            if (r[j] != 0.0) Rb(j, 3 + j) = 1.0;
            if (r[nj + j] != 0.0) Rb(nj + j, nv + 3 + j) = 1.0;
          }
        }
        d.acc.add(scale * w.state_bounds, r, Rb);
      }
    }
  }

  void running_costs(LeggedData& d, const VectorXd& q, const VectorXd& v, const VectorXd& u, bool derivs) const {
    const RobotModel& model = *ctx_->model;
    const CostWeights& w = ctx_->weights;
    const int nv = model.nv(), ndx = 2 * nv, nu = model.nu();
    state_costs(d, q, v, 1.0, derivs);
    MatrixXd Rx, Ru;
    if (derivs) {
      Rx.setZero(nu, ndx);
      Ru.setIdentity(nu, nu);
    }
    d.acc.add(w.control, u, Rx, Ru);

    const ContactSet& cs = spec_.contacts;
    const DynamicsDerivatives& der = d.derivatives;
    if (!cs.empty()) {
      VectorXd wf(cs.nf());
      for (int c = 0; c < cs.size(); ++c) wf.segment<2>(2 * c) = w.force;
      d.acc.add(wf, d.lambda, derivs ? der.lx : MatrixXd(), derivs ? der.lu : MatrixXd());
      if (w.quasi_static > 0.0) {
        MatrixXd qRx, qRu;
        const VectorXd r = quasi_static_residual(model, q, u, cs.frames, d.lambda, derivs ? &der.lx : nullptr,
                                                 derivs ? &der.lu : nullptr, derivs ? &qRx : nullptr,
                                                 derivs ? &qRu : nullptr);
        d.acc.add(w.quasi_static * w.velocity, r, qRx, qRu);
      }
      for (int c = 0; c < cs.size(); ++c) {
        const ConeResidual cr = cone_residual(ctx_->cone, d.lambda.segment<2>(2 * c));
        if (cr.r.squaredNorm() == 0.0) continue;
        d.acc.add(w.cone, cr.r, derivs ? MatrixXd(cr.Rlambda * der.lx.middleRows(2 * c, 2)) : MatrixXd(),
                  derivs ? MatrixXd(cr.Rlambda * der.lu.middleRows(2 * c, 2)) : MatrixXd());
      }
    }
    swing_costs(d, q, derivs);
  }

  void swing_costs(LeggedData& d, const VectorXd& q, bool derivs) const {
    if (spec_.swing.empty() || ctx_->weights.placement == 0.0) return;
    const RobotModel& model = *ctx_->model;
    const int nv = model.nv(), m = 2 * static_cast<int>(spec_.swing.size());
    VectorXd r(m);
    for (std::size_t i = 0; i < spec_.swing.size(); ++i) {
      r.segment<2>(2 * i) = frame_position(model, q, spec_.swing[i]) - spec_.swing_refs[i].position;
    }
    MatrixXd Rx;
    if (derivs) {
      Rx = MatrixXd::Zero(m, 2 * nv);
      Rx.leftCols(nv) = contact_jacobian(model, q, spec_.swing);
    }
    d.acc.add(ctx_->weights.placement, r, Rx);
  }

  void impulse_costs(LeggedData& d, const VectorXd& q, const VectorXd& v, bool derivs) const {
    const RobotModel& model = *ctx_->model;
    const CostWeights& w = ctx_->weights;
    const int nv = model.nv(), m = 2 * static_cast<int>(spec_.touchdown.size());
    if (m > 0) {
      VectorXd r(m);
      for (std::size_t i = 0; i < spec_.touchdown.size(); ++i) {
        r.segment<2>(2 * i) = frame_position(model, q, spec_.touchdown[i]) - spec_.touchdown_refs[i].position;
      }
      MatrixXd Rx;
      if (derivs) {
        Rx = MatrixXd::Zero(m, 2 * nv);
        Rx.leftCols(nv) = contact_jacobian(model, q, spec_.touchdown);
      }
      d.acc.add(w.touchdown_placement, r, Rx);

      if (w.contact_velocity > 0.0) {
        VectorXd vel;
        MatrixXd Jv;
        if (derivs) {
          frame_velocity_jacobian(model, q, v, spec_.touchdown, vel, Jv);
        } else {
          vel.resize(m);
          for (std::size_t i = 0; i < spec_.touchdown.size(); ++i) {
            vel.segment<2>(2 * i) = frame_velocity(model, q, v, spec_.touchdown[i]);
          }
        }
        for (std::size_t i = 0; i < spec_.touchdown.size(); ++i) vel.segment<2>(2 * i) -= spec_.touchdown_refs[i].velocity;
        d.acc.add(w.contact_velocity, vel, Jv);
      }
    }
    const ContactSet& cs = spec_.contacts;
    for (int c = 0; c < cs.size(); ++c) {
      const ConeResidual cr = cone_residual(ctx_->cone, d.lambda.segment<2>(2 * c));
      if (cr.r.squaredNorm() == 0.0) continue;
      d.acc.add(w.cone, cr.r, derivs ? MatrixXd(cr.Rlambda * d.derivatives.lx.middleRows(2 * c, 2)) : MatrixXd());
    }
  }

  std::shared_ptr<const LeggedContext> ctx_;
  NodeSpec spec_;
};

// ---------------------------------------------------------------------------
// problem assembly

struct ProblemOptions {
  double baumgarte_freq = 20.0;
  double baumgarte_damping = 1.0;
  double restitution = 0.0;
  FrictionCone cone{};
  /// Largest allowed distance (in node periods) between a phase boundary and its node.
  double alignment_tolerance = 0.5;
};

/// Node specifications for a horizon of N running steps. Node k sits at
/// origin + (first_node + k) dt; the integer offset keeps node times of a
/// receding horizon bit-identical. A foot is active at node k if it is in
/// stance at the node midpoint, which snaps every phase boundary to its
/// nearest node.
inline std::vector<NodeSpec> plan_nodes(const ContactSchedule& schedule, int N, double dt, double origin,
                                        const ProblemOptions& opt = {}, int first_node = 0) {
  if (!(dt > 0.0)) throw InvalidConfig("node dt must be > 0");
  if (N < 0) throw InvalidConfig("horizon must be >= 0");
  schedule.validate();
  auto time_of = [&](double k) { return origin + (first_node + k) * dt; };
  const double t0 = time_of(0);
  const double t_end = time_of(N);
  if (t_end > schedule.end_time() + 1e-9) throw InvalidConfig("contact schedule is shorter than the horizon");
  const double tol = opt.alignment_tolerance * dt + 1e-9;
  for (int f = 0; f < schedule.num_feet(); ++f) {
    double clock = schedule.start_time;
    for (const auto& ph : schedule.feet[f].phases) {
      for (double te : {clock + ph.active_duration, clock + ph.active_duration + ph.inactive_duration}) {
        if (te < t0 - 1e-12 || te > t_end + 1e-12) continue;
        const double s = (te - t0) / dt;
        if (std::abs(s - std::round(s)) * dt > tol) {
          throw InvalidConfig("contact phase boundary at t=" + std::to_string(te) + " is not aligned with the node grid");
        }
      }
      const double lift = clock + ph.active_duration, land = lift + ph.inactive_duration;
      if (ph.inactive_duration > 0.0 && land > t0 && lift < t_end &&
          std::ceil((lift - t0) / dt - 0.5) == std::ceil((land - t0) / dt - 0.5)) {
        throw InvalidConfig("swing phase ending at t=" + std::to_string(land) + " is shorter than the node grid resolves");
      }
      clock += ph.active_duration + ph.inactive_duration;
    }
  }

  auto active_at = [&](int k) {
    std::vector<int> a;
    for (int f = 0; f < schedule.num_feet(); ++f) {
      if (schedule.active(f, time_of(k + 0.5))) a.push_back(f);
    }
    return a;
  };
  auto contact_set = [&](const std::vector<int>& frames, double t) {
    ContactSet cs;
    cs.frames = frames;
    cs.baumgarte_freq = opt.baumgarte_freq;
    cs.baumgarte_damping = opt.baumgarte_damping;
    for (int f : frames) cs.anchors.push_back(schedule.placement(f, t));
    return cs;
  };

  std::vector<NodeSpec> nodes;
  std::vector<int> prev = active_at(0);
  for (int k = 0; k <= N; ++k) {
    const double tk = time_of(k);
    const std::vector<int> act = active_at(k);
    if (k > 0) {
      std::vector<int> gained;
      for (int f : act) {
        if (std::find(prev.begin(), prev.end(), f) == prev.end()) gained.push_back(f);
      }
      if (!gained.empty()) {
        NodeSpec imp;
        imp.kind = NodeKind::Impulse;
        imp.time = tk;
        imp.contacts = contact_set(act, time_of(k + 0.5));
        imp.touchdown = gained;
        for (int f : gained) {
          SwingReference r;
          r.position = schedule.placement(f, time_of(k + 0.5));
          imp.touchdown_refs.push_back(r);
        }
        nodes.push_back(std::move(imp));
      }
    }
    NodeSpec n;
    n.kind = k < N ? NodeKind::Running : NodeKind::Terminal;
    n.time = tk;
    n.dt = k < N ? dt : 0.0;
    if (k < N) {
      n.contacts = contact_set(act, time_of(k + 0.5));
      for (int f = 0; f < schedule.num_feet(); ++f) {
        if (std::find(act.begin(), act.end(), f) != act.end()) continue;
        n.swing.push_back(f);
        n.swing_refs.push_back(schedule.swing(f, tk));
      }
    }
    nodes.push_back(std::move(n));
    prev = act;
  }
  return nodes;
}

/// The assembled hybrid problem plus the node specs it was built from.
struct LeggedProblem {
  std::shared_ptr<const LeggedContext> context;
  std::vector<NodeSpec> specs;
  std::unique_ptr<ShootingProblem> problem;

  int impulse_count() const {
    int n = 0;
    for (const auto& s : specs) n += s.kind == NodeKind::Impulse;
    return n;
  }
};

inline std::shared_ptr<const LeggedContext> make_context(const RobotModel& model, CostWeights weights,
                                                         const ProblemOptions& opt = {}) {
  model.validate();
  weights.resolve(model);
  auto ctx = std::make_shared<LeggedContext>();
  ctx->model = std::make_shared<const RobotModel>(model);
  ctx->state = std::make_shared<const MultibodyStateSpace>(model);
  ctx->weights = std::move(weights);
  ctx->cone = cone_matrices(opt.cone);
  ctx->bounds = StateBounds::from_model(model);
  ctx->restitution = opt.restitution;
  if (opt.restitution < 0.0 || opt.restitution > 1.0) throw InvalidConfig("restitution must lie in [0, 1]");
  return ctx;
}

inline LeggedProblem build_problem(std::shared_ptr<const LeggedContext> ctx, const ContactSchedule& schedule,
                                   const VectorXd& x0, int N, double dt, double t0 = 0.0,
                                   const ProblemOptions& opt = {}, int first_node = 0) {
  check_dim(x0.size(), ctx->model->nx(), "initial state");
  LeggedProblem lp;
  lp.context = ctx;
  lp.specs = plan_nodes(schedule, N, dt, t0, opt, first_node);
  std::vector<std::shared_ptr<ActionModel>> running;
  for (std::size_t i = 0; i + 1 < lp.specs.size(); ++i) running.push_back(std::make_shared<LeggedAction>(ctx, lp.specs[i]));
  auto terminal = std::make_shared<LeggedAction>(ctx, lp.specs.back());
  lp.problem = std::make_unique<ShootingProblem>(x0, std::move(running), std::move(terminal));
  return lp;
}

inline LeggedProblem build_problem(const RobotModel& model, const ContactSchedule& schedule, const CostWeights& weights,
                                   const VectorXd& x0, int N, double dt, double t0 = 0.0,
                                   const ProblemOptions& opt = {}) {
  return build_problem(make_context(model, weights, opt), schedule, x0, N, dt, t0, opt);
}

/// Schedule with every foot in stance at its current placement for `duration`.
inline ContactSchedule standing_schedule(const RobotModel& model, const VectorXd& q, double duration) {
  ContactSchedule s;
  s.final_stance = duration;
  for (int c = 0; c < static_cast<int>(model.contacts.size()); ++c) {
    FootSchedule f;
    f.initial_placement = frame_position(model, q, c);
    s.feet.push_back(f);
  }
  return s;
}

}  // namespace fbmpc
