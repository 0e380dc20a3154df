#pragma once

#include <Eigen/SVD>
#include <string>

#include "fbmpc/controllers/qp.hpp"

namespace fbmpc {

class Stage1Infeasible : public Error {
public:
  using Error::Error;
};

/// Least-squares task ||A y - a||^2 at one priority level.
struct HqpTask {
  std::string name;
  MatrixXd A;
  VectorXd a;
};

/// Two-sided inequalities lower <= B y <= upper shared by every stage.
/// Infinite bounds are dropped.
struct HqpInequalities {
  MatrixXd B;
  VectorXd lower, upper;
};

struct HqpOptions {
  double regularization = 1e-10;  ///< relative Tikhonov term keeping each stage strictly convex
  double rank_tolerance = 1e-10;  ///< relative singular-value cutoff for null spaces
  /// Stage-1 residual above which the hierarchy reports Stage1Infeasible (hard first stage).
  double first_stage_tolerance = std::numeric_limits<double>::infinity();
  double feasibility_tolerance = 1e-12;  ///< inequality slack accepted for the unconstrained step
  int max_qp_iters = 1000;
};

struct HqpResult {
  VectorXd y;
  std::vector<double> stage_residuals;  ///< ||A_i y_i - a_i|| right after stage i
  std::vector<double> final_residuals;  ///< ||A_i y - a_i|| at the returned y
  std::vector<int> null_dims;           ///< null-space dimension after stage i
};

/// Orthonormal basis of ker(A).
inline MatrixXd null_space_basis(const MatrixXd& A, double rel_tol = 1e-10) {
  const Eigen::Index n = A.cols();
  if (A.rows() == 0) return MatrixXd::Identity(n, n);
  Eigen::JacobiSVD<MatrixXd> svd(A, Eigen::ComputeFullV);
  const VectorXd& sv = svd.singularValues();
  const double cutoff = rel_tol * std::max(1.0, sv.size() ? sv[0] : 0.0);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv[rank] > cutoff) ++rank;
  return svd.matrixV().rightCols(n - rank);
}

/// Null-space projector N(A) = I - A^+ A.
inline MatrixXd null_space_projector(const MatrixXd& A, double rel_tol = 1e-10) {
  const MatrixXd Z = null_space_basis(A, rel_tol);
  return Z * Z.transpose();
}

/// Prioritized cascade: stage i minimizes its task over y = y_{i-1} + Z_{i-1} w
/// where Z_{i-1} spans the common null space of all higher tasks, subject to
/// the inequalities. Higher-stage residuals are untouched by construction.
inline HqpResult hqp_solve(const std::vector<HqpTask>& tasks, const HqpInequalities& ineq, const HqpOptions& opt = {}) {
  if (tasks.empty()) throw InvalidConfig("hierarchy needs at least one task");
  const Eigen::Index n = tasks.front().A.cols();
  for (const auto& t : tasks) {
    check_dim(t.A.cols(), n, "task matrix columns");
    check_dim(t.a.size(), t.A.rows(), "task target");
  }

  // finite inequality rows as G y <= h
  std::vector<std::pair<Eigen::Index, double>> rows;
  if (ineq.B.rows() > 0) {
    check_dim(ineq.B.cols(), n, "inequality matrix columns");
    check_dim(ineq.lower.size(), ineq.B.rows(), "inequality lower bound");
    check_dim(ineq.upper.size(), ineq.B.rows(), "inequality upper bound");
    for (Eigen::Index i = 0; i < ineq.B.rows(); ++i) {
      if (ineq.lower[i] > ineq.upper[i]) throw Stage1Infeasible("inequality bounds cross");
      if (std::isfinite(ineq.upper[i])) rows.push_back({i, 1.0});
      if (std::isfinite(ineq.lower[i])) rows.push_back({i, -1.0});
    }
  }
  MatrixXd G(static_cast<Eigen::Index>(rows.size()), n);
  VectorXd h(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto [i, sgn] = rows[k];
    G.row(static_cast<Eigen::Index>(k)) = sgn * ineq.B.row(i);
    h[static_cast<Eigen::Index>(k)] = sgn > 0 ? ineq.upper[i] : -ineq.lower[i];
  }

  HqpResult res;
  res.y = VectorXd::Zero(n);
  MatrixXd Z = MatrixXd::Identity(n, n);
  for (std::size_t s = 0; s < tasks.size(); ++s) {
    const HqpTask& t = tasks[s];
    const Eigen::Index r = Z.cols();
    if (r > 0) {
      const MatrixXd AZ = t.A * Z;
      const VectorXd e0 = t.A * res.y - t.a;
      // exact minimum-norm step when it already satisfies the inequalities
      const VectorXd w_ls = -AZ.completeOrthogonalDecomposition().solve(e0);
      const VectorXd y_ls = res.y + Z * w_ls;
      if (G.rows() == 0 || (G * y_ls - h).maxCoeff() <= opt.feasibility_tolerance) {
        res.y = y_ls;
        Z = Z * null_space_basis(AZ, opt.rank_tolerance);
        const double resid = (t.A * res.y - t.a).norm();
        if (s == 0 && resid > opt.first_stage_tolerance * std::max(1.0, t.a.norm())) {
          throw Stage1Infeasible("first stage residual " + std::to_string(resid));
        }
        res.stage_residuals.push_back(resid);
        res.null_dims.push_back(static_cast<int>(Z.cols()));
        continue;
      }
      MatrixXd H = AZ.transpose() * AZ;
      const double eps = opt.regularization * std::max(1.0, H.diagonal().maxCoeff());
      H.diagonal().array() += eps;
      const VectorXd g = AZ.transpose() * e0;
      const MatrixXd GZ = G * Z;
      const VectorXd hz = h - G * res.y;
      const QpResult qp = solve_qp(H, g, MatrixXd(0, r), VectorXd(0), GZ, hz, opt.max_qp_iters);
      if (qp.status != QpStatus::Optimal) {
        if (s == 0) throw Stage1Infeasible(std::string("first stage QP ") + to_string(qp.status));
        // the previous iterate stays feasible; keep it
      } else {
        res.y += Z * qp.z;
      }
      Z = Z * null_space_basis(AZ, opt.rank_tolerance);
    }
    const double resid = (t.A * res.y - t.a).norm();
    if (s == 0 && resid > opt.first_stage_tolerance * std::max(1.0, t.a.norm())) {
      throw Stage1Infeasible("first stage residual " + std::to_string(resid));
    }
    res.stage_residuals.push_back(resid);
    res.null_dims.push_back(static_cast<int>(Z.cols()));
  }
  for (const auto& t : tasks) res.final_residuals.push_back((t.A * res.y - t.a).norm());
  return res;
}

}  // namespace fbmpc
