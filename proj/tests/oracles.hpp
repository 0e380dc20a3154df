#pragma once

// Independent reference computations shared by unit tests and the acceptance
// binary. Nothing here reuses the library's factorizations.

#include <Eigen/LU>

#include <algorithm>

#include "fbmpc/contact/dynamics.hpp"

namespace fbmpc::oracle {

/// Dense (nv + nf) KKT solve of the contact dynamics, ignoring the Schur path.
inline void dense_contact_dynamics(const RobotModel& model, const VectorXd& q, const VectorXd& v, const VectorXd& u,
                                   const ContactSet& contacts, VectorXd& vdot, VectorXd& lambda) {
  const int nv = model.nv(), nf = contacts.nf();
  const MatrixXd M = mass_matrix(model, q);
  MatrixXd K = MatrixXd::Zero(nv + nf, nv + nf);
  VectorXd rhs(nv + nf);
  K.topLeftCorner(nv, nv) = M;
  rhs.head(nv) = model.actuation_matrix() * u - nonlinear_effects(model, q, v);
  if (nf > 0) {
    const MatrixXd J = contact_jacobian(model, q, contacts.frames);
    K.topRightCorner(nv, nf) = -J.transpose();
    K.bottomLeftCorner(nf, nv) = J;
    rhs.tail(nf) = -(frame_acceleration_bias(model, q, v, contacts.frames) + baumgarte_term(model, q, v, contacts));
  }
  const VectorXd sol = K.fullPivLu().solve(rhs);
  vdot = sol.head(nv);
  lambda = sol.tail(nf);
}

inline void dense_impulse_dynamics(const RobotModel& model, const VectorXd& q, const VectorXd& v_minus,
                                   const ContactSet& contacts, double e, VectorXd& v_plus, VectorXd& impulse) {
  const int nv = model.nv(), nf = contacts.nf();
  const MatrixXd M = mass_matrix(model, q);
  MatrixXd K = MatrixXd::Zero(nv + nf, nv + nf);
  VectorXd rhs(nv + nf);
  K.topLeftCorner(nv, nv) = M;
  rhs.head(nv) = M * v_minus;
  if (nf > 0) {
    const MatrixXd J = contact_jacobian(model, q, contacts.frames);
    K.topRightCorner(nv, nf) = -J.transpose();
    K.bottomLeftCorner(nf, nv) = J;
    rhs.tail(nf) = -e * J * v_minus;
  }
  const VectorXd sol = K.fullPivLu().solve(rhs);
  v_plus = sol.head(nv);
  impulse = sol.tail(nf);
}

// Exhaustive active-set enumeration: each coordinate at lo, at hi or free.
inline VectorXd enumerate_boxqp(const MatrixXd& H, const VectorXd& g, const VectorXd& lo, const VectorXd& hi) {
  const int n = static_cast<int>(g.size());
  int patterns = 1;
  for (int i = 0; i < n; ++i) patterns *= 3;
  double best = std::numeric_limits<double>::infinity();
  VectorXd best_x;
  for (int p = 0; p < patterns; ++p) {
    VectorXd x = VectorXd::Zero(n);
    std::vector<int> fr;
    int code = p;
    for (int i = 0; i < n; ++i, code /= 3) {
      if (code % 3 == 0) x[i] = lo[i];
      else if (code % 3 == 1) x[i] = hi[i];
      else fr.push_back(i);
    }
    if (!fr.empty()) {
      const int nf = static_cast<int>(fr.size());
      MatrixXd Hff(nf, nf);
      VectorXd rhs(nf);
      for (int a = 0; a < nf; ++a) {
        double s = g[fr[a]];
        for (int j = 0; j < n; ++j)
          if (std::find(fr.begin(), fr.end(), j) == fr.end()) s += H(fr[a], j) * x[j];
        rhs[a] = -s;
        for (int c = 0; c < nf; ++c) Hff(a, c) = H(fr[a], fr[c]);
      }
      const VectorXd xf = Hff.ldlt().solve(rhs);
      for (int a = 0; a < nf; ++a) x[fr[a]] = xf[a];
    }
    if ((x.array() < lo.array() - 1e-14).any() || (x.array() > hi.array() + 1e-14).any()) continue;
    const double v = 0.5 * x.dot(H * x) + g.dot(x);
    if (v < best) {
      best = v;
      best_x = x;
    }
  }
  return best_x;
}

}  // namespace fbmpc::oracle
