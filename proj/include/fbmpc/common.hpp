#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbmpc {

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::VectorXd;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

class InvalidModel : public Error {
public:
  using Error::Error;
};

class InvalidConfig : public Error {
public:
  using Error::Error;
};

class RankDeficientContacts : public Error {
public:
  using Error::Error;
};

class UnknownContactFrame : public Error {
public:
  using Error::Error;
};

inline void check_dim(Eigen::Index got, Eigen::Index expected, const char* what) {
  if (got != expected) {
    throw DimensionMismatch(std::string(what) + ": expected dimension " + std::to_string(expected) +
                            ", got " + std::to_string(got));
  }
}

/// Forward-mode dual number. Kinematics and dynamics kernels are templated on
/// the scalar so that exact directional derivatives come out of one extra pass.
struct Dual {
  double v = 0.0;
  double d = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT: implicit on purpose
  constexpr Dual(double value, double deriv) : v(value), d(deriv) {}

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { d = d * o.v + v * o.d; v *= o.v; return *this; }
  Dual& operator/=(const Dual& o) { d = (d * o.v - v * o.d) / (o.v * o.v); v /= o.v; return *this; }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }

inline Dual sin(const Dual& a) { return {std::sin(a.v), std::cos(a.v) * a.d}; }
inline Dual cos(const Dual& a) { return {std::cos(a.v), -std::sin(a.v) * a.d}; }
inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.v);
  return {s, s > 0.0 ? 0.5 * a.d / s : 0.0};
}
inline Dual atan2(const Dual& y, const Dual& x) {
  const double r2 = x.v * x.v + y.v * y.v;
  return {std::atan2(y.v, x.v), (x.v * y.d - y.v * x.d) / r2};
}

inline double value(double x) { return x; }
inline double value(const Dual& x) { return x.v; }
inline double deriv(const Dual& x) { return x.d; }

using std::atan2;
using std::cos;
using std::sin;
using std::sqrt;

/// Minimal 2-vector usable with both double and Dual scalars.
template <typename T>
struct Vec2 {
  T x{};
  T y{};

  Vec2() = default;
  Vec2(T x_, T y_) : x(x_), y(y_) {}
  explicit Vec2(const Vector2d& v) : x(v.x()), y(v.y()) {}

  Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
  friend Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
  friend Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
  friend Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
  friend Vec2 operator*(const T& s, const Vec2& a) { return {s * a.x, s * a.y}; }
};

/// Rotation by +90 degrees: the planar analogue of omega x r for unit omega.
template <typename T>
Vec2<T> perp(const Vec2<T>& a) {
  return {-a.y, a.x};
}

/// Planar cross product a x b (z component).
template <typename T>
T cross(const Vec2<T>& a, const Vec2<T>& b) {
  return a.x * b.y - a.y * b.x;
}

template <typename T>
T dot(const Vec2<T>& a, const Vec2<T>& b) {
  return a.x * b.x + a.y * b.y;
}

inline Vector2d to_eigen(const Vec2<double>& a) { return {a.x, a.y}; }

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * M_PI;
  double r = std::fmod(a + M_PI, kTwoPi);
  if (r <= 0.0) r += kTwoPi;
  return r - M_PI;
}

inline double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }
inline double inf_norm(const MatrixXd& m) { return m.size() ? m.lpNorm<Eigen::Infinity>() : 0.0; }

}  // namespace fbmpc
