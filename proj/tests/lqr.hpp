#pragma once

#include <Eigen/Cholesky>

#include "fbmpc/boxfddp/solver.hpp"
#include "test_util.hpp"

namespace fbmpc::test {

inline MatrixXd random_spd(Rng& rng, int n, double min_eig = 0.1) {
  const MatrixXd A = MatrixXd::NullaryExpr(n, n, [&]() { return rng.uniform(); });
  return A * A.transpose() + min_eig * MatrixXd::Identity(n, n);
}

struct LqrInstance {
  MatrixXd A, B, Q, R, QN;
  VectorXd x0;
  int N;
};

inline LqrInstance random_lqr(Rng& rng, int n = 4, int m = 2, int N = 20) {
  LqrInstance L;
  L.A = MatrixXd::Identity(n, n) + 0.1 * MatrixXd::NullaryExpr(n, n, [&]() { return rng.uniform(); });
  L.B = MatrixXd::NullaryExpr(n, m, [&]() { return rng.uniform(); });
  L.Q = random_spd(rng, n);
  L.R = random_spd(rng, m);
  L.QN = 10.0 * random_spd(rng, n);
  L.x0 = rng.vec(n, 2.0);
  L.N = N;
  return L;
}

inline ShootingProblem lqr_problem(const LqrInstance& L, double u_bound = std::numeric_limits<double>::infinity()) {
  std::vector<std::shared_ptr<ActionModel>> running;
  for (int k = 0; k < L.N; ++k) {
    auto a = std::make_shared<LinearQuadraticAction>(L.A, L.B, VectorXd(), L.Q, L.R);
    a->u_lower.setConstant(-u_bound);
    a->u_upper.setConstant(u_bound);
    running.push_back(a);
  }
  auto term = std::make_shared<LinearQuadraticAction>(L.A, MatrixXd::Zero(L.A.rows(), 0), VectorXd(), L.QN,
                                                      MatrixXd::Zero(0, 0));
  return ShootingProblem(L.x0, running, term);
}

// Standalone Riccati recursion for x'Qx + u'Ru stage costs: gains u = K x.
inline std::vector<MatrixXd> riccati_gains(const LqrInstance& L) {
  std::vector<MatrixXd> K(L.N);
  MatrixXd P = L.QN;
  for (int k = L.N - 1; k >= 0; --k) {
    const MatrixXd S = L.R + L.B.transpose() * P * L.B;
    K[k] = -S.ldlt().solve(L.B.transpose() * P * L.A);
    const MatrixXd Acl = L.A + L.B * K[k];
    P = L.Q + K[k].transpose() * L.R * K[k] + Acl.transpose() * P * Acl;
    P = 0.5 * (P + P.transpose()).eval();
  }
  return K;
}

inline SolverOptions exact_options() {
  SolverOptions o;
  o.mu_init = 0.0;
  o.mu_min = 0.0;
  return o;
}

}  // namespace fbmpc::test
