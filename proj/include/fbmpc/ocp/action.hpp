#pragma once

#include <algorithm>
#include <atomic>
#include <limits>
#include <memory>

#include "fbmpc/state_space.hpp"

namespace fbmpc {

/// Per-node workspace. Derivatives are of the node cost itself (no 1/2
/// factor), in tangent coordinates of the state space.
struct ActionData {
  virtual ~ActionData() = default;

  VectorXd xnext;
  double cost = 0.0;
  VectorXd Lx, Lu;
  MatrixXd Lxx, Lxu, Luu;
  MatrixXd Fx, Fu;

  void resize(int nx, int ndx, int nu) {
    xnext = VectorXd::Zero(nx);
    Lx = VectorXd::Zero(ndx);
    Lu = VectorXd::Zero(nu);
    Lxx = MatrixXd::Zero(ndx, ndx);
    Lxu = MatrixXd::Zero(ndx, nu);
    Luu = MatrixXd::Zero(nu, nu);
    Fx = MatrixXd::Zero(ndx, ndx);
    Fu = MatrixXd::Zero(ndx, nu);
  }
};

/// Counts node workspaces created; the MPC loop checks it does not move.
inline std::atomic<long>& node_allocation_counter() {
  static std::atomic<long> counter{0};
  return counter;
}

/// Discrete-time node x' = f(x, u) with cost l(x, u). Terminal nodes have
/// nu = 0 and their xnext is ignored.
class ActionModel {
public:
  ActionModel(std::shared_ptr<const StateSpace> state, int nu) : state_(std::move(state)), nu_(nu) {
    u_lower = VectorXd::Constant(nu, -std::numeric_limits<double>::infinity());
    u_upper = VectorXd::Constant(nu, std::numeric_limits<double>::infinity());
  }
  virtual ~ActionModel() = default;

  const StateSpace& state() const { return *state_; }
  std::shared_ptr<const StateSpace> state_ptr() const { return state_; }
  int nu() const { return nu_; }

  virtual std::unique_ptr<ActionData> create_data() const {
    auto d = std::make_unique<ActionData>();
    d->resize(state_->nx(), state_->ndx(), nu_);
    ++node_allocation_counter();
    return d;
  }

  virtual void calc(ActionData& data, const VectorXd& x, const VectorXd& u) const = 0;
  /// Fills derivatives at (x, u); calc must have been called at the same point.
  virtual void calc_diff(ActionData& data, const VectorXd& x, const VectorXd& u) const = 0;

  bool has_control_bounds() const {
    for (int i = 0; i < nu_; ++i) {
      if (std::isfinite(u_lower[i]) || std::isfinite(u_upper[i])) return true;
    }
    return false;
  }

  VectorXd u_lower;
  VectorXd u_upper;

protected:
  std::shared_ptr<const StateSpace> state_;
  int nu_;
};

/// Multiple-shooting problem: x0, running nodes and a terminal node.
class ShootingProblem {
public:
  ShootingProblem(VectorXd x0, std::vector<std::shared_ptr<ActionModel>> running,
                  std::shared_ptr<ActionModel> terminal)
      : x0_(std::move(x0)), running_(std::move(running)), terminal_(std::move(terminal)) {
    if (!terminal_) throw InvalidConfig("shooting problem needs a terminal node");
    check_dim(x0_.size(), terminal_->state().nx(), "initial state");
    allocate();
    n_ = static_cast<int>(running_.size());
  }

  /// Number of active running nodes.
  int size() const { return n_; }
  /// Active plus spare nodes.
  int capacity() const { return static_cast<int>(running_.size()); }
  const VectorXd& x0() const { return x0_; }
  void set_x0(const VectorXd& x0) {
    check_dim(x0.size(), x0_.size(), "initial state");
    x0_ = x0;
  }

  const ActionModel& running(int k) const { return *running_[k]; }
  ActionModel& running_mut(int k) { return *running_[k]; }
  ActionModel& terminal_mut() { return *terminal_; }
  const ActionModel& terminal() const { return *terminal_; }
  ActionData& data(int k) { return *datas_[k]; }
  const ActionData& data(int k) const { return *datas_[k]; }
  ActionData& terminal_data() { return *terminal_data_; }
  const ActionData& terminal_data() const { return *terminal_data_; }

  /// Replaces node k; the workspace is recreated only when the node type changes.
  void set_running(int k, std::shared_ptr<ActionModel> m) {
    running_[k] = std::move(m);
    datas_[k] = running_[k]->create_data();
  }

  /// Rolls the active nodes and their workspaces left by `shift` (no allocation).
  void rotate_left(int shift) {
    if (shift < 0 || shift > n_) throw InvalidConfig("rotate_left: shift out of range");
    std::rotate(running_.begin(), running_.begin() + shift, running_.begin() + n_);
    std::rotate(datas_.begin(), datas_.begin() + shift, datas_.begin() + n_);
  }

  /// Adds an inactive node (with its workspace) to the pool.
  void add_spare(std::shared_ptr<ActionModel> m) {
    running_.push_back(std::move(m));
    datas_.push_back(running_.back()->create_data());
  }

  /// Activates the first n pooled nodes.
  void resize(int n) {
    if (n < 0 || n > capacity()) throw InvalidConfig("shooting problem capacity exceeded");
    n_ = n;
  }

  double calc(const std::vector<VectorXd>& xs, const std::vector<VectorXd>& us) {
    check_trajectory(xs, us);
    double cost = 0.0;
    for (int k = 0; k < size(); ++k) {
      running_[k]->calc(*datas_[k], xs[k], us[k]);
      cost += datas_[k]->cost;
    }
    terminal_->calc(*terminal_data_, xs.back(), VectorXd());
    return cost + terminal_data_->cost;
  }

  void calc_diff(const std::vector<VectorXd>& xs, const std::vector<VectorXd>& us) {
    check_trajectory(xs, us);
    for (int k = 0; k < size(); ++k) running_[k]->calc_diff(*datas_[k], xs[k], us[k]);
    terminal_->calc_diff(*terminal_data_, xs.back(), VectorXd());
  }

  /// Open-loop rollout from x0.
  std::vector<VectorXd> rollout(const std::vector<VectorXd>& us) {
    std::vector<VectorXd> xs(size() + 1);
    xs[0] = x0_;
    for (int k = 0; k < size(); ++k) {
      running_[k]->calc(*datas_[k], xs[k], us[k]);
      xs[k + 1] = datas_[k]->xnext;
    }
    return xs;
  }

  void check_trajectory(const std::vector<VectorXd>& xs, const std::vector<VectorXd>& us) const {
    check_dim(static_cast<Eigen::Index>(xs.size()), size() + 1, "state trajectory length");
    check_dim(static_cast<Eigen::Index>(us.size()), size(), "control trajectory length");
    for (int k = 0; k < size(); ++k) {
      check_dim(xs[k].size(), running_[k]->state().nx(), "state");
      check_dim(us[k].size(), running_[k]->nu(), "control");
    }
    check_dim(xs.back().size(), terminal_->state().nx(), "terminal state");
  }

private:
  void allocate() {
    datas_.clear();
    for (const auto& m : running_) datas_.push_back(m->create_data());
    terminal_data_ = terminal_->create_data();
  }

  VectorXd x0_;
  std::vector<std::shared_ptr<ActionModel>> running_;
  std::shared_ptr<ActionModel> terminal_;
  std::vector<std::unique_ptr<ActionData>> datas_;
  std::unique_ptr<ActionData> terminal_data_;
  int n_ = 0;
};

/// Linear dynamics x' = A x + B u + c with cost
/// x'Q x + 2 x'N u + u'R u + 2 q'x + 2 r'u (Euclidean state).
class LinearQuadraticAction final : public ActionModel {
public:
  LinearQuadraticAction(MatrixXd A, MatrixXd B, VectorXd c, MatrixXd Q, MatrixXd R, MatrixXd N = MatrixXd(),
                        VectorXd q = VectorXd(), VectorXd r = VectorXd())
      : ActionModel(std::make_shared<EuclideanStateSpace>(static_cast<int>(A.rows())), static_cast<int>(B.cols())),
        A_(std::move(A)), B_(std::move(B)), c_(std::move(c)), Q_(std::move(Q)), R_(std::move(R)), N_(std::move(N)),
        q_(std::move(q)), r_(std::move(r)) {
    const int n = static_cast<int>(A_.rows());
    if (N_.size() == 0) N_ = MatrixXd::Zero(n, nu_);
    if (q_.size() == 0) q_ = VectorXd::Zero(n);
    if (r_.size() == 0) r_ = VectorXd::Zero(nu_);
    if (c_.size() == 0) c_ = VectorXd::Zero(n);
  }

  void calc(ActionData& d, const VectorXd& x, const VectorXd& u) const override {
    if (nu_ > 0) {
      d.xnext = A_ * x + B_ * u + c_;
      d.cost = x.dot(Q_ * x) + 2.0 * x.dot(N_ * u) + u.dot(R_ * u) + 2.0 * q_.dot(x) + 2.0 * r_.dot(u);
    } else {
      d.xnext = x;
      d.cost = x.dot(Q_ * x) + 2.0 * q_.dot(x);
    }
  }

  void calc_diff(ActionData& d, const VectorXd& x, const VectorXd& u) const override {
    d.Lxx = 2.0 * Q_;
    if (nu_ > 0) {
      d.Fx = A_;
      d.Fu = B_;
      d.Lx = 2.0 * (Q_ * x + N_ * u + q_);
      d.Lu = 2.0 * (R_ * u + N_.transpose() * x + r_);
      d.Lxu = 2.0 * N_;
      d.Luu = 2.0 * R_;
    } else {
      d.Lx = 2.0 * (Q_ * x + q_);
    }
  }

  const MatrixXd& A() const { return A_; }
  const MatrixXd& B() const { return B_; }
  const MatrixXd& Q() const { return Q_; }
  const MatrixXd& R() const { return R_; }

private:
  MatrixXd A_, B_;
  VectorXd c_;
  MatrixXd Q_, R_, N_;
  VectorXd q_, r_;
};

}  // namespace fbmpc
