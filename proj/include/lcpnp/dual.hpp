#pragma once

#include <Eigen/Core>
#include <cmath>

namespace lcpnp {

/// Forward-mode scalar carrying one directional derivative. Seeding d = 1 on
/// a single input coordinate and running a computation once yields that
/// coordinate's partial derivative exactly (to machine precision).
struct Dual {
  double v = 0.0;  ///< value
  double d = 0.0;  ///< directional derivative

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: constants promote implicitly
  Dual(double value, double deriv) : v(value), d(deriv) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    d -= o.d;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    d = d * o.v + v * o.d;
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    d = (d * o.v - v * o.d) / (o.v * o.v);
    v /= o.v;
    return *this;
  }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
inline Dual operator+(const Dual& a) { return a; }

inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }
inline bool operator==(const Dual& a, const Dual& b) { return a.v == b.v; }
inline bool operator!=(const Dual& a, const Dual& b) { return a.v != b.v; }

inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.v);
  return {s, a.d / (2.0 * s)};
}
inline Dual log(const Dual& a) { return {std::log(a.v), a.d / a.v}; }
inline Dual abs(const Dual& a) { return a.v < 0.0 ? -a : a; }
inline Dual abs2(const Dual& a) { return a * a; }
inline Dual sin(const Dual& a) { return {std::sin(a.v), std::cos(a.v) * a.d}; }
inline Dual cos(const Dual& a) { return {std::cos(a.v), -std::sin(a.v) * a.d}; }
inline Dual atan2(const Dual& y, const Dual& x) {
  const double den = x.v * x.v + y.v * y.v;
  return {std::atan2(y.v, x.v), (x.v * y.d - y.v * x.d) / den};
}
inline const Dual& conj(const Dual& a) { return a; }
inline const Dual& real(const Dual& a) { return a; }
inline double imag(const Dual&) { return 0.0; }
inline bool isfinite(const Dual& a) {
  return std::isfinite(a.v) && std::isfinite(a.d);
}

/// value() lets templated code read the underlying double of either scalar
/// kind, e.g. for branch decisions or for detaching a quantity from the
/// derivative flow.
inline double value(double x) { return x; }
inline double value(const Dual& x) { return x.v; }

}  // namespace lcpnp

namespace Eigen {

template <>
struct NumTraits<lcpnp::Dual> : NumTraits<double> {
  using Real = lcpnp::Dual;
  using NonInteger = lcpnp::Dual;
  using Nested = lcpnp::Dual;
  using Literal = double;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 3,
    MulCost = 3,
  };
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<lcpnp::Dual, double, BinaryOp> {
  using ReturnType = lcpnp::Dual;
};
template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, lcpnp::Dual, BinaryOp> {
  using ReturnType = lcpnp::Dual;
};

}  // namespace Eigen
