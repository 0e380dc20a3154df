#pragma once

#include "fbmpc/common.hpp"

namespace fbmpc {

/// Rigid transform on the plane: rotation by `theta`, then translation `t`.
template <typename T>
struct Pose2 {
  Vec2<T> t{};
  T theta{};

  Vec2<T> rotate(const Vec2<T>& a) const {
    const T c = cos(theta), s = sin(theta);
    return {c * a.x - s * a.y, s * a.x + c * a.y};
  }
  Vec2<T> rotate_inv(const Vec2<T>& a) const {
    const T c = cos(theta), s = sin(theta);
    return {c * a.x + s * a.y, -s * a.x + c * a.y};
  }
  Vec2<T> act(const Vec2<T>& a) const { return t + rotate(a); }

  /// this * other
  Pose2 compose(const Pose2& other) const { return {act(other.t), theta + other.theta}; }
  Pose2 inverse() const { return {-rotate_inv(t), -theta}; }
};

namespace se2 {

namespace detail {
// sin(w)/w and (1-cos(w))/w with series near zero (Dual-safe).
template <typename T>
void v_coeffs(const T& w, T& a, T& b) {
  if (std::abs(value(w)) < 1e-4) {
    const T w2 = w * w;
    a = T(1.0) - w2 / 6.0 + w2 * w2 / 120.0;
    b = w / 2.0 - w * w2 / 24.0 + w * w2 * w2 / 720.0;
  } else {
    a = sin(w) / w;
    b = (T(1.0) - cos(w)) / w;
  }
}
}  // namespace detail

/// Exponential map of a body-frame twist (vx, vy, w).
template <typename T>
Pose2<T> exp(const T& vx, const T& vy, const T& w) {
  T a, b;
  detail::v_coeffs(w, a, b);
  return {{a * vx - b * vy, b * vx + a * vy}, w};
}

/// Logarithm; returns the twist (vx, vy, w) with w in the principal branch.
template <typename T>
void log(const Pose2<T>& p, T& vx, T& vy, T& w) {
  // principal angle: subtract the wrap offset computed on the value part
  w = p.theta - T(value(p.theta) - wrap_angle(value(p.theta)));
  T half_cot;
  if (std::abs(value(w)) < 1e-4) {
    const T w2 = w * w;
    half_cot = T(1.0) - w2 / 12.0 - w2 * w2 / 720.0;
  } else {
    const T h = w / 2.0;
    half_cot = h * cos(h) / sin(h);
  }
  const T h = w / 2.0;
  vx = half_cot * p.t.x + h * p.t.y;
  vy = -h * p.t.x + half_cot * p.t.y;
}

}  // namespace se2
}  // namespace fbmpc
