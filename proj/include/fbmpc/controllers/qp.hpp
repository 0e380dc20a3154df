#pragma once

#include <Eigen/Cholesky>

#include "fbmpc/common.hpp"

namespace fbmpc {

enum class QpStatus { Optimal, Infeasible, MaxIterations };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::MaxIterations: return "max_iterations";
  }
  return "?";
}

struct QpResult {
  VectorXd z;
  VectorXd eq_multipliers;    ///< nu with H z + g + E' nu + G' mu = 0
  VectorXd ineq_multipliers;  ///< mu >= 0, zero on inactive rows
  std::vector<int> active;    ///< active inequality rows
  QpStatus status = QpStatus::Optimal;
  int iterations = 0;
};

namespace detail {

// Dual active-set method of Goldfarb and Idnani on
//   min 1/2 x'Gx + g0'x  s.t.  CE'x + ce0 = 0,  CI'x + ci0 >= 0,
// keeping J = L^-T Q and the triangular factor R of the active constraints.
class GoldfarbIdnani {
public:
  GoldfarbIdnani(const MatrixXd& G, const VectorXd& g0, const MatrixXd& CE, const VectorXd& ce0, const MatrixXd& CI,
                 const VectorXd& ci0)
      : G_(G), g0_(g0), CE_(CE), ce0_(ce0), CI_(CI), ci0_(ci0), n_(static_cast<int>(G.rows())),
        p_(static_cast<int>(ce0.size())), m_(static_cast<int>(ci0.size())) {}

  QpResult solve(int max_iters) {
    QpResult res;
    const double inf = std::numeric_limits<double>::infinity();
    Eigen::LLT<MatrixXd> chol(G_);
    if (chol.info() != Eigen::Success) throw InvalidConfig("QP Hessian must be positive definite");
    R_ = MatrixXd::Zero(n_, n_);
    J_ = chol.matrixU().solve(MatrixXd::Identity(n_, n_));
    const double scale = std::max(1.0, ci0_.size() ? ci0_.lpNorm<Eigen::Infinity>() : 0.0);
    x_ = -chol.solve(g0_);
    u_ = VectorXd::Zero(m_ + p_);
    A_.assign(static_cast<std::size_t>(m_ + p_), 0);
    VectorXd d(n_), z(n_), r(m_ + p_), s(m_);
    iq_ = 0;
    r_norm_ = 1.0;

    for (int i = 0; i < p_; ++i) {
      const VectorXd np = CE_.col(i);
      d = J_.transpose() * np;
      update_z(z, d);
      update_r(r, d);
      double t2 = 0.0;
      if (std::abs(z.dot(z)) > kEps) t2 = (-np.dot(x_) - ce0_[i]) / z.dot(np);
      x_ += t2 * z;
      u_[iq_] = t2;
      u_.head(iq_) -= t2 * r.head(iq_);
      A_[i] = -i - 1;
      if (!add_constraint(d)) return finish(res, QpStatus::Infeasible);
    }

    std::vector<int> iai(static_cast<std::size_t>(m_));
    std::vector<bool> iaexcl(static_cast<std::size_t>(m_));
    for (int i = 0; i < m_; ++i) iai[i] = i;
    int ip = 0;
    VectorXd x_old, u_old;
    std::vector<int> A_old;

    for (;;) {
      if (res.iterations++ > max_iters) return finish(res, QpStatus::MaxIterations);
      for (int i = p_; i < iq_; ++i) iai[A_[i]] = -1;
      double psi = 0.0;
      for (int i = 0; i < m_; ++i) {
        iaexcl[i] = true;
        s[i] = CI_.col(i).dot(x_) + ci0_[i];
        psi += std::min(0.0, s[i]);
      }
      if (std::abs(psi) <= m_ * kEps * scale * 100.0) return finish(res, QpStatus::Optimal);
      u_old = u_.head(iq_);
      A_old.assign(A_.begin(), A_.begin() + iq_);
      x_old = x_;

    select:
      double ss = 0.0;
      for (int i = 0; i < m_; ++i) {
        if (s[i] < ss && iai[i] != -1 && iaexcl[i]) {
          ss = s[i];
          ip = i;
        }
      }
      if (ss >= 0.0) return finish(res, QpStatus::Optimal);
      {
        const VectorXd np = CI_.col(ip);
        u_[iq_] = 0.0;
        A_[iq_] = ip;
        for (;;) {
          if (res.iterations++ > max_iters) return finish(res, QpStatus::MaxIterations);
          d = J_.transpose() * np;
          update_z(z, d);
          update_r(r, d);
          // partial step length: first active inequality whose multiplier hits zero
          int l = 0;
          double t1 = inf;
          for (int k = p_; k < iq_; ++k) {
            if (r[k] > 0.0 && u_[k] / r[k] < t1) {
              t1 = u_[k] / r[k];
              l = A_[k];
            }
          }
          const double zz = z.dot(z);
          const double t2 = std::abs(zz) > kEps ? -s[ip] / z.dot(np) : inf;
          const double t = std::min(t1, t2);
          if (t >= inf) return finish(res, QpStatus::Infeasible);
          if (t2 >= inf) {
            u_.head(iq_) -= t * r.head(iq_);
            u_[iq_] += t;
            iai[l] = l;
            delete_constraint(l);
            continue;
          }
          x_ += t * z;
          u_.head(iq_) -= t * r.head(iq_);
          u_[iq_] += t;
          if (t == t2) {
            if (!add_constraint(d)) {
              iaexcl[ip] = false;
              delete_constraint(ip);
              for (int i = 0; i < m_; ++i) iai[i] = i;
              for (int i = p_; i < iq_; ++i) {
                A_[i] = A_old[i];
                u_[i] = u_old[i];
                iai[A_[i]] = -1;
              }
              x_ = x_old;
              goto select;
            }
            iai[ip] = -1;
            break;
          }
          iai[l] = l;
          delete_constraint(l);
          s[ip] = CI_.col(ip).dot(x_) + ci0_[ip];
        }
      }
    }
  }

private:
  static constexpr double kEps = std::numeric_limits<double>::epsilon();

  QpResult& finish(QpResult& res, QpStatus status) {
    res.status = status;
    res.z = x_;
    res.eq_multipliers = VectorXd::Zero(p_);
    res.ineq_multipliers = VectorXd::Zero(m_);
    for (int i = 0; i < iq_; ++i) {
      if (A_[i] < 0) {
        res.eq_multipliers[-A_[i] - 1] = u_[i];
      } else {
        res.ineq_multipliers[A_[i]] = u_[i];
        res.active.push_back(A_[i]);
      }
    }
    return res;
  }

  void update_z(VectorXd& z, const VectorXd& d) const { z = J_.rightCols(n_ - iq_) * d.tail(n_ - iq_); }

  void update_r(VectorXd& r, const VectorXd& d) const {
    if (iq_ == 0) return;
    r.head(iq_) = R_.topLeftCorner(iq_, iq_).triangularView<Eigen::Upper>().solve(d.head(iq_));
  }

  bool add_constraint(VectorXd& d) {
    for (int j = n_ - 1; j >= iq_ + 1; --j) {
      double cc = d[j - 1], ss = d[j];
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d[j] = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d[j - 1] = -h;
      } else {
        d[j - 1] = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = 0; k < n_; ++k) {
        const double t1 = J_(k, j - 1), t2 = J_(k, j);
        J_(k, j - 1) = t1 * cc + t2 * ss;
        J_(k, j) = xny * (t1 + J_(k, j - 1)) - t2;
      }
    }
    ++iq_;
    R_.col(iq_ - 1).head(iq_) = d.head(iq_);
    if (std::abs(d[iq_ - 1]) <= kEps * r_norm_) return false;
    r_norm_ = std::max(r_norm_, std::abs(d[iq_ - 1]));
    return true;
  }

  void delete_constraint(int l) {
    int qq = -1;
    for (int i = p_; i < iq_; ++i) {
      if (A_[i] == l) {
        qq = i;
        break;
      }
    }
    if (qq < 0) return;
    for (int i = qq; i < iq_ - 1; ++i) {
      A_[i] = A_[i + 1];
      u_[i] = u_[i + 1];
      R_.col(i) = R_.col(i + 1);
    }
    A_[iq_ - 1] = A_[iq_];
    u_[iq_ - 1] = u_[iq_];
    A_[iq_] = 0;
    u_[iq_] = 0.0;
    R_.col(iq_ - 1).head(iq_).setZero();
    --iq_;
    if (iq_ == 0) return;
    for (int j = qq; j < iq_; ++j) {
      double cc = R_(j, j), ss = R_(j + 1, j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      R_(j + 1, j) = 0.0;
      if (cc < 0.0) {
        R_(j, j) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        R_(j, j) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = j + 1; k < iq_; ++k) {
        const double t1 = R_(j, k), t2 = R_(j + 1, k);
        R_(j, k) = t1 * cc + t2 * ss;
        R_(j + 1, k) = xny * (t1 + R_(j, k)) - t2;
      }
      for (int k = 0; k < n_; ++k) {
        const double t1 = J_(k, j), t2 = J_(k, j + 1);
        J_(k, j) = t1 * cc + t2 * ss;
        J_(k, j + 1) = xny * (J_(k, j) + t1) - t2;
      }
    }
  }

  const MatrixXd& G_;
  const VectorXd& g0_;
  const MatrixXd& CE_;
  const VectorXd& ce0_;
  const MatrixXd& CI_;
  const VectorXd& ci0_;
  int n_, p_, m_;
  MatrixXd R_, J_;
  VectorXd x_, u_;
  std::vector<int> A_;
  int iq_ = 0;
  double r_norm_ = 1.0;
};

}  // namespace detail

/// Strictly convex dense QP
///   min 1/2 z'Hz + g'z  s.t.  E z = e,  G z <= h.
/// Empty E/G mean no constraints of that kind.
inline QpResult solve_qp(const MatrixXd& H, const VectorXd& g, const MatrixXd& E, const VectorXd& e,
                         const MatrixXd& G, const VectorXd& h, int max_iters = 1000) {
  const Eigen::Index n = H.rows();
  check_dim(H.cols(), n, "QP Hessian");
  check_dim(g.size(), n, "QP gradient");
  if (E.size() > 0) check_dim(E.cols(), n, "QP equality matrix");
  if (G.size() > 0) check_dim(G.cols(), n, "QP inequality matrix");
  check_dim(E.rows(), e.size(), "QP equality rhs");
  check_dim(G.rows(), h.size(), "QP inequality rhs");
  const MatrixXd CE = E.rows() > 0 ? MatrixXd(E.transpose()) : MatrixXd(n, 0);
  const VectorXd ce0 = -e;
  const MatrixXd CI = G.rows() > 0 ? MatrixXd(-G.transpose()) : MatrixXd(n, 0);
  const VectorXd ci0 = h;
  detail::GoldfarbIdnani gi(H, g, CE, ce0, CI, ci0);
  QpResult res = gi.solve(max_iters);
  res.eq_multipliers = -res.eq_multipliers;
  return res;
}

}  // namespace fbmpc
