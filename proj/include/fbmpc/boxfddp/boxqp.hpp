#pragma once

#include <Eigen/Cholesky>

#include "fbmpc/common.hpp"

namespace fbmpc {

struct BoxQpOptions {
  int max_iters = 100;
  double tol = 1e-11;       ///< projected-gradient tolerance, relative to max(1, |g|_inf)
  double armijo = 0.1;
  double step_decrease = 0.6;
  double min_step = 1e-22;
};

struct BoxQpResult {
  VectorXd x;
  std::vector<int> free_set;
  std::vector<int> clamped_set;
  MatrixXd H_free_inverse;  ///< (H restricted to the free set)^-1
  int iterations = 0;
  bool converged = false;
  bool not_pd = false;      ///< a free-subspace Hessian failed to factorize
};

/// min 1/2 x'Hx + g'x  s.t.  lo <= x <= hi, by projected Newton: Newton
/// steps on the free subspace with a projected Armijo line search.
inline BoxQpResult boxqp(const MatrixXd& H, const VectorXd& g, const VectorXd& lo, const VectorXd& hi,
                         const VectorXd& x_init = VectorXd(), const BoxQpOptions& opt = {}) {
  const int n = static_cast<int>(g.size());
  check_dim(H.rows(), n, "boxqp H rows");
  check_dim(H.cols(), n, "boxqp H cols");
  check_dim(lo.size(), n, "boxqp lower bound");
  check_dim(hi.size(), n, "boxqp upper bound");
  if ((lo.array() > hi.array()).any()) throw InvalidConfig("boxqp needs lo <= hi");

  BoxQpResult out;
  out.x = x_init.size() == n ? x_init : VectorXd::Zero(n);
  out.x = out.x.cwiseMax(lo).cwiseMin(hi);
  if (n == 0) {
    out.converged = true;
    return out;
  }
  auto value = [&](const VectorXd& x) { return 0.5 * x.dot(H * x) + g.dot(x); };
  const double scale = std::max(1.0, g.lpNorm<Eigen::Infinity>());

  VectorXd grad = g + H * out.x;
  std::vector<char> clamped(n, 0);
  Eigen::LLT<MatrixXd> llt;
  auto classify = [&]() {
    out.free_set.clear();
    out.clamped_set.clear();
    for (int i = 0; i < n; ++i) {
      clamped[i] = (out.x[i] <= lo[i] && grad[i] > 0.0) || (out.x[i] >= hi[i] && grad[i] < 0.0);
      (clamped[i] ? out.clamped_set : out.free_set).push_back(i);
    }
  };
  auto factor_free = [&]() {
    const int nf = static_cast<int>(out.free_set.size());
    MatrixXd Hff(nf, nf);
    for (int a = 0; a < nf; ++a)
      for (int b = 0; b < nf; ++b) Hff(a, b) = H(out.free_set[a], out.free_set[b]);
    llt.compute(Hff);
    return nf == 0 || llt.info() == Eigen::Success;
  };

  for (out.iterations = 0; out.iterations < opt.max_iters; ++out.iterations) {
    grad = g + H * out.x;
    const double pg = (out.x - (out.x - grad).cwiseMax(lo).cwiseMin(hi)).lpNorm<Eigen::Infinity>();
    classify();
    if (pg < opt.tol * scale) {
      out.converged = true;
      break;
    }
    if (!factor_free()) {
      out.not_pd = true;
      return out;
    }
    // Newton step on the free coordinates, clamped ones held fixed
    VectorXd gf(out.free_set.size());
    for (std::size_t a = 0; a < out.free_set.size(); ++a) gf[a] = grad[out.free_set[a]];
    const VectorXd df = -llt.solve(gf);
    VectorXd dx = VectorXd::Zero(n);
    for (std::size_t a = 0; a < out.free_set.size(); ++a) dx[out.free_set[a]] = df[a];

    const double v0 = value(out.x);
    const double slope = grad.dot(dx);
    double step = 1.0;
    VectorXd cand;
    bool moved = false;
    while (step > opt.min_step) {
      cand = (out.x + step * dx).cwiseMax(lo).cwiseMin(hi);
      if (value(cand) - v0 <= opt.armijo * step * slope) {
        moved = true;
        break;
      }
      step *= opt.step_decrease;
    }
    if (!moved) break;
    out.x = cand;
  }

  grad = g + H * out.x;
  classify();
  if (!out.converged) {
    const double pg = (out.x - (out.x - grad).cwiseMax(lo).cwiseMin(hi)).lpNorm<Eigen::Infinity>();
    out.converged = pg < opt.tol * scale;
  }
  if (!factor_free()) {
    out.not_pd = true;
    return out;
  }
  const int nf = static_cast<int>(out.free_set.size());
  out.H_free_inverse = nf > 0 ? MatrixXd(llt.solve(MatrixXd::Identity(nf, nf))) : MatrixXd(0, 0);
  return out;
}

}  // namespace fbmpc
