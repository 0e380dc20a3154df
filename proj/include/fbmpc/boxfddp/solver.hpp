#pragma once

#include <cstdio>
#include <ostream>

#include "fbmpc/boxfddp/boxqp.hpp"
#include "fbmpc/ocp/action.hpp"

namespace fbmpc {

struct SolverOptions {
  int max_iters = 100;
  double tol = 1e-6;                ///< on the free-subspace |Q_u|_inf
  double feasibility_tol = 1e-9;    ///< on |gaps|_inf
  double mu_init = 1e-9;
  double mu_min = 1e-9;
  double mu_max = 1e6;
  double mu_factor = 10.0;
  double b1 = 0.1;                  ///< Goldstein constant
  int line_search_steps = 11;       ///< alpha = 1, 1/2, ..., 2^-(steps-1)
  bool box = true;                  ///< false: ignore control bounds (plain FDDP)
  BoxQpOptions qp{};
};

enum class SolverStatus { Converged, MaxIterations, NoStepAccepted, Iterating };

inline const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::Converged: return "converged";
    case SolverStatus::MaxIterations: return "max_iterations";
    case SolverStatus::NoStepAccepted: return "no_step_accepted";
    case SolverStatus::Iterating: return "iterating";
  }
  return "?";
}

/// Local policy du = k + K dx around the current trajectory, with the
/// quadratic value model of every node.
struct Policy {
  std::vector<VectorXd> k;
  std::vector<MatrixXd> K;
  std::vector<VectorXd> Vx;   ///< N + 1
  std::vector<MatrixXd> Vxx;  ///< N + 1
};

struct IterationLog {
  int iter = 0;
  double cost = 0.0;
  double gap = 0.0;
  double mu = 0.0;
  double alpha = 0.0;  ///< 0 when no step was taken
  double qu_norm = 0.0;
  double expected = 0.0;  ///< expected decrease at alpha
  double actual = 0.0;    ///< actual decrease at alpha
  bool accepted = false;
};

/// Feasibility-driven DDP with box-constrained controls.
class BoxFDDP {
public:
  explicit BoxFDDP(ShootingProblem& problem, SolverOptions opt = {}) : problem_(problem), opt_(opt), mu_(opt.mu_init) {
    allocate();
  }

  ShootingProblem& problem() { return problem_; }
  const SolverOptions& options() const { return opt_; }
  SolverOptions& options() { return opt_; }

  const std::vector<VectorXd>& xs() const { return xs_; }
  const std::vector<VectorXd>& us() const { return us_; }
  const std::vector<VectorXd>& gaps() const { return fs_; }
  const Policy& policy() const { return policy_; }
  const std::vector<VectorXd>& Qu() const { return Qu_; }
  const std::vector<MatrixXd>& Quu() const { return Quu_; }
  const std::vector<MatrixXd>& Qux() const { return Qux_; }
  const std::vector<std::vector<int>>& clamped() const { return clamped_; }
  const std::vector<IterationLog>& log() const { return log_; }
  double cost() const { return cost_; }
  double mu() const { return mu_; }
  void set_mu(double mu) { mu_ = std::clamp(mu, opt_.mu_min, opt_.mu_max); }
  double gap_norm() const {
    double g = 0.0;
    for (const auto& f : fs_) g = std::max(g, f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0);
    return g;
  }
  bool feasible() const { return gap_norm() < opt_.feasibility_tol; }
  double qu_norm() const { return qu_norm_; }
  int iterations() const { return iter_; }
  /// Expected improvement model dJ(alpha) = alpha d1 + alpha^2 d2 / 2 of the last backward pass.
  Vector2d expected_model() const { return {d1_, d2_}; }

  /// Re-dimensions workspaces after the problem's node structure changed.
  void allocate() {
    const int N = problem_.size();
    xs_.resize(N + 1);
    xs_try_.resize(N + 1);
    fs_.resize(N + 1);
    us_.resize(N);
    us_try_.resize(N);
    policy_.k.resize(N);
    policy_.K.resize(N);
    policy_.Vx.resize(N + 1);
    policy_.Vxx.resize(N + 1);
    Qu_.resize(N);
    Quu_.resize(N);
    Qux_.resize(N);
    clamped_.resize(N);
    const int ndx = problem_.terminal().state().ndx();
    for (int t = 0; t < N; ++t) {
      const int nu = problem_.running(t).nu();
      if (policy_.k[t].size() != nu) policy_.k[t] = VectorXd::Zero(nu);
      if (policy_.K[t].rows() != nu || policy_.K[t].cols() != ndx) policy_.K[t] = MatrixXd::Zero(nu, ndx);
    }
    fresh_ = false;
  }

  /// Sets the current trajectory and evaluates cost and gaps.
  void set_candidate(const std::vector<VectorXd>& xs, const std::vector<VectorXd>& us) {
    problem_.check_trajectory(xs, us);
    xs_ = xs;
    us_ = us;
    if (opt_.box) clamp_controls();
    evaluate();
  }

  /// Full solve from (xs, us). Empty vectors mean x0 everywhere and zero controls.
  SolverStatus solve(std::vector<VectorXd> xs = {}, std::vector<VectorXd> us = {}, int max_iters = -1) {
    if (xs.empty()) xs.assign(problem_.size() + 1, problem_.x0());
    if (us.empty()) {
      for (int t = 0; t < problem_.size(); ++t) us.push_back(VectorXd::Zero(problem_.running(t).nu()));
    }
    set_candidate(xs, us);
    const int iters = max_iters < 0 ? opt_.max_iters : max_iters;
    status_ = SolverStatus::MaxIterations;
    for (int i = 0; i < iters; ++i) {
      const SolverStatus s = iterate();
      if (s == SolverStatus::Converged || s == SolverStatus::NoStepAccepted) {
        status_ = s;
        break;
      }
    }
    return status_;
  }

  SolverStatus status() const { return status_; }
  /// True when the node workspaces hold calc() at the current (xs, us).
  bool workspaces_current() const { return fresh_; }

  /// One iteration: derivatives, backward pass (raising mu while not PD),
  /// Goldstein line search. Returns Iterating after an accepted step.
  SolverStatus iterate() {
    if (!fresh_) evaluate();
    problem_.calc_diff(xs_, us_);
    ++iter_;
    while (!backward_pass()) {
      if (!increase_mu()) return record_failure();
    }
    if (qu_norm_ < opt_.tol && feasible()) {
      log_.push_back({iter_, cost_, gap_norm(), mu_, 0.0, qu_norm_, 0.0, 0.0, false});
      return SolverStatus::Converged;
    }
    double alpha = 1.0;
    for (int i = 0; i < opt_.line_search_steps; ++i, alpha *= 0.5) {
      const double trial = forward_pass(alpha);
      const double expected = -(alpha * d1_ + 0.5 * alpha * alpha * d2_);
      const double actual = cost_ - trial;
      if (std::isfinite(trial) && accept(expected, actual)) {
        commit(trial);
        log_.push_back({iter_, cost_, gap_norm(), mu_, alpha, qu_norm_, expected, actual, true});
        mu_ = std::max(opt_.mu_min, mu_ / opt_.mu_factor);
        return SolverStatus::Iterating;
      }
    }
    // trials overwrote the node workspaces
    fresh_ = false;
    if (!increase_mu()) return record_failure();
    log_.push_back({iter_, cost_, gap_norm(), mu_, 0.0, qu_norm_, 0.0, 0.0, false});
    return SolverStatus::Iterating;
  }

  /// Backward pass at the current derivatives. False when a free-subspace
  /// Hessian is not positive definite.
  bool backward_pass() {
    const int N = problem_.size();
    const int ndx = problem_.terminal().state().ndx();
    const ActionData& dT = problem_.terminal_data();
    policy_.Vxx[N] = dT.Lxx;
    policy_.Vx[N] = dT.Lx + dT.Lxx * fs_[N];
    qu_norm_ = 0.0;
    for (int t = N - 1; t >= 0; --t) {
      const ActionModel& m = problem_.running(t);
      const ActionData& d = problem_.data(t);
      const int nu = m.nu();
      MatrixXd Vxx_r = policy_.Vxx[t + 1];
      Vxx_r.diagonal().array() += mu_;
      const VectorXd& Vx1 = policy_.Vx[t + 1];
      const MatrixXd FxV = d.Fx.transpose() * Vxx_r;
      const VectorXd Qx = d.Lx + d.Fx.transpose() * Vx1;
      MatrixXd Qxx = d.Lxx + FxV * d.Fx;
      Qu_[t] = d.Lu + d.Fu.transpose() * Vx1;
      const MatrixXd Qxu = d.Lxu + FxV * d.Fu;
      Qux_[t] = Qxu.transpose();
      Quu_[t] = d.Luu + d.Fu.transpose() * Vxx_r * d.Fu;
      Quu_[t].diagonal().array() += mu_;

      VectorXd& k = policy_.k[t];
      MatrixXd& K = policy_.K[t];
      K.setZero(nu, ndx);
      clamped_[t].clear();
      if (nu > 0) {
        VectorXd lo = VectorXd::Constant(nu, -std::numeric_limits<double>::infinity());
        VectorXd hi = -lo;
        if (opt_.box && m.has_control_bounds()) {
          lo = m.u_lower - us_[t];
          hi = m.u_upper - us_[t];
        }
        const VectorXd warm = k.size() == nu ? VectorXd(k.cwiseMax(lo).cwiseMin(hi)) : VectorXd::Zero(nu);
        const BoxQpResult qp = boxqp(Quu_[t], Qu_[t], lo, hi, warm, opt_.qp);
        if (qp.not_pd) return false;
        k = qp.x;
        clamped_[t] = qp.clamped_set;
        const int nf = static_cast<int>(qp.free_set.size());
        if (nf > 0) {
          MatrixXd Qux_f(nf, ndx);
          for (int a = 0; a < nf; ++a) Qux_f.row(a) = Qux_[t].row(qp.free_set[a]);
          const MatrixXd Kf = -qp.H_free_inverse * Qux_f;
          for (int a = 0; a < nf; ++a) {
            K.row(qp.free_set[a]) = Kf.row(a);
            qu_norm_ = std::max(qu_norm_, std::abs(Qu_[t][qp.free_set[a]]));
          }
        }
      } else {
        k.resize(0);
      }
      VectorXd Vx = Qx;
      MatrixXd Vxx = Qxx;
      if (nu > 0) {
        const VectorXd Quuk = Quu_[t] * k;
        Vx += K.transpose() * (Quuk + Qu_[t]) + Qxu * k;
        Vxx += K.transpose() * Quu_[t] * K + K.transpose() * Qux_[t] + Qxu * K;
      }
      Vxx = 0.5 * (Vxx + Vxx.transpose()).eval();
      policy_.Vxx[t] = Vxx;
      policy_.Vx[t] = Vx + Vxx * fs_[t];
      if (!Vx.allFinite() || !Vxx.allFinite()) return false;
    }
    expected_improvement();
    return true;
  }

  /// Nonlinear rollout of the current policy with step alpha. Gaps of the
  /// trial are (1 - alpha) times the current ones. Returns the trial cost
  /// (infinity on divergence).
  double forward_pass(double alpha) {
    const int N = problem_.size();
    const StateSpace& S = problem_.terminal().state();
    double cost = 0.0;
    xs_try_[0] = S.integrate(problem_.x0(), (alpha - 1.0) * S.difference(problem_.x0(), xs_[0]));
    for (int t = 0; t < N; ++t) {
      const ActionModel& m = problem_.running(t);
      ActionData& d = problem_.data(t);
      const VectorXd dx = S.difference(xs_try_[t], xs_[t]);
      us_try_[t] = us_[t] + alpha * policy_.k[t] + policy_.K[t] * dx;
      if (opt_.box && m.nu() > 0) us_try_[t] = us_try_[t].cwiseMax(m.u_lower).cwiseMin(m.u_upper);
      try {
        m.calc(d, xs_try_[t], us_try_[t]);
      } catch (const RankDeficientContacts&) {
        return std::numeric_limits<double>::infinity();
      }
      cost += d.cost;
      if (!d.xnext.allFinite() || !std::isfinite(cost)) return std::numeric_limits<double>::infinity();
      xs_try_[t + 1] = S.integrate(d.xnext, (alpha - 1.0) * fs_[t + 1]);
    }
    problem_.terminal().calc(problem_.terminal_data(), xs_try_[N], VectorXd());
    cost += problem_.terminal_data().cost;
    return std::isfinite(cost) ? cost : std::numeric_limits<double>::infinity();
  }

  /// Trial trajectory of the last forward pass.
  const std::vector<VectorXd>& xs_trial() const { return xs_try_; }
  const std::vector<VectorXd>& us_trial() const { return us_try_; }

  void write_log_csv(std::ostream& os) const {
    os << "iter,cost,gap,mu,alpha,qu_norm,expected,actual,accepted\n";
    char buf[256];
    for (const auto& r : log_) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.iter, r.cost, r.gap, r.mu,
                    r.alpha, r.qu_norm, r.expected, r.actual, r.accepted ? 1 : 0);
      os << buf;
    }
  }

  void clear_log() {
    log_.clear();
    iter_ = 0;
  }

  /// Roundoff allowance of the acceptance test, relative to max(1, |cost|).
  static constexpr double kAcceptSlack = 1e-13;

private:
  bool accept(double expected, double actual) const {
    const double slack = kAcceptSlack * std::max(1.0, std::abs(cost_));
    // Goldstein: the actual change must reach b1 of the predicted decrease, or
    // when an increase is predicted (closing gaps) stay within 1/b1 of it
    if (expected >= 0.0) return actual >= opt_.b1 * expected - slack;
    return actual >= expected / opt_.b1 - slack;
  }

  bool increase_mu() {
    if (mu_ >= opt_.mu_max) return false;
    mu_ = std::min(opt_.mu_max, mu_ * opt_.mu_factor);
    return true;
  }

  SolverStatus record_failure() {
    log_.push_back({iter_, cost_, gap_norm(), mu_, 0.0, qu_norm_, 0.0, 0.0, false});
    fresh_ = false;
    return SolverStatus::NoStepAccepted;
  }

  void clamp_controls() {
    for (int t = 0; t < problem_.size(); ++t) {
      const ActionModel& m = problem_.running(t);
      if (m.nu() > 0) us_[t] = us_[t].cwiseMax(m.u_lower).cwiseMin(m.u_upper);
    }
  }

  // cost and gaps of (xs_, us_), leaving the node workspaces evaluated there
  void evaluate() {
    cost_ = problem_.calc(xs_, us_);
    update_gaps();
    fresh_ = true;
  }

  void update_gaps() {
    const StateSpace& S = problem_.terminal().state();
    fs_[0] = S.difference(problem_.x0(), xs_[0]);
    for (int t = 0; t < problem_.size(); ++t) fs_[t + 1] = S.difference(problem_.data(t).xnext, xs_[t + 1]);
  }

  void commit(double trial_cost) {
    xs_.swap(xs_try_);
    us_.swap(us_try_);
    cost_ = trial_cost;
    update_gaps();
    fresh_ = true;
  }

  // Linearized rollout of the policy at alpha = 1; the quadratic model of the
  // cost along it gives d1 and d2 (the trajectory scales linearly with alpha).
  void expected_improvement() {
    const int N = problem_.size();
    VectorXd z = fs_[0];
    d1_ = 0.0;
    d2_ = 0.0;
    for (int t = 0; t < N; ++t) {
      const ActionData& d = problem_.data(t);
      const VectorXd w = policy_.k[t] + policy_.K[t] * z;
      d1_ += d.Lx.dot(z) + d.Lu.dot(w);
      d2_ += z.dot(d.Lxx * z) + 2.0 * z.dot(d.Lxu * w) + w.dot(d.Luu * w);
      z = (d.Fx * z + d.Fu * w + fs_[t + 1]).eval();
    }
    const ActionData& dT = problem_.terminal_data();
    d1_ += dT.Lx.dot(z);
    d2_ += z.dot(dT.Lxx * z);
  }

  ShootingProblem& problem_;
  SolverOptions opt_;
  double mu_;
  std::vector<VectorXd> xs_, us_, xs_try_, us_try_, fs_;
  Policy policy_;
  std::vector<VectorXd> Qu_;
  std::vector<MatrixXd> Quu_, Qux_;
  std::vector<std::vector<int>> clamped_;
  std::vector<IterationLog> log_;
  double cost_ = 0.0;
  double qu_norm_ = 0.0;
  double d1_ = 0.0, d2_ = 0.0;
  int iter_ = 0;
  bool fresh_ = false;
  SolverStatus status_ = SolverStatus::Iterating;
};

}  // namespace fbmpc
