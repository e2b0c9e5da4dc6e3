#pragma once

// Unevaluated sum of two doubles (hi + lo, |lo| <= ulp(hi)/2) built from
// error-free transformations.  About 106 significant bits; used wherever a
// reference value must be computed in more than working precision.

#include <cmath>
#include <compare>

namespace jhsvd {

namespace eft {

// s + e == a + b exactly
inline void two_sum(double a, double b, double& s, double& e) noexcept {
  s = a + b;
  const double bb = s - a;
  e = (a - (s - bb)) + (b - bb);
}

// requires |a| >= |b| or a == 0
inline void fast_two_sum(double a, double b, double& s, double& e) noexcept {
  s = a + b;
  e = b - (s - a);
}

// p + e == a * b exactly (barring underflow)
inline void two_prod(double a, double b, double& p, double& e) noexcept {
  p = a * b;
  e = std::fma(a, b, -p);
}

}  // namespace eft

struct DoubleDouble {
  double hi = 0.0;
  double lo = 0.0;

  constexpr DoubleDouble() = default;
  constexpr DoubleDouble(double x) : hi(x), lo(0.0) {}  // NOLINT(implicit)
  constexpr DoubleDouble(double h, double l) : hi(h), lo(l) {}

  [[nodiscard]] double to_double() const noexcept { return hi + lo; }

  friend DoubleDouble operator-(DoubleDouble a) noexcept { return {-a.hi, -a.lo}; }

  friend DoubleDouble operator+(DoubleDouble a, DoubleDouble b) noexcept {
    double s, e, t, f;
    eft::two_sum(a.hi, b.hi, s, e);
    eft::two_sum(a.lo, b.lo, t, f);
    e += t;
    eft::fast_two_sum(s, e, s, e);
    e += f;
    eft::fast_two_sum(s, e, s, e);
    return {s, e};
  }

  friend DoubleDouble operator-(DoubleDouble a, DoubleDouble b) noexcept { return a + (-b); }

  friend DoubleDouble operator*(DoubleDouble a, DoubleDouble b) noexcept {
    double p, e;
    eft::two_prod(a.hi, b.hi, p, e);
    e += a.hi * b.lo + a.lo * b.hi;
    eft::fast_two_sum(p, e, p, e);
    return {p, e};
  }

  friend DoubleDouble operator/(DoubleDouble a, DoubleDouble b) noexcept {
    const double q1 = a.hi / b.hi;
    DoubleDouble r = a - b * DoubleDouble(q1);
    const double q2 = r.hi / b.hi;
    r = r - b * DoubleDouble(q2);
    const double q3 = r.hi / b.hi;
    double s, e;
    eft::fast_two_sum(q1, q2, s, e);
    return DoubleDouble(s, e) + DoubleDouble(q3);
  }

  DoubleDouble& operator+=(DoubleDouble b) noexcept { return *this = *this + b; }
  DoubleDouble& operator-=(DoubleDouble b) noexcept { return *this = *this - b; }
  DoubleDouble& operator*=(DoubleDouble b) noexcept { return *this = *this * b; }
  DoubleDouble& operator/=(DoubleDouble b) noexcept { return *this = *this / b; }

  friend bool operator==(DoubleDouble a, DoubleDouble b) noexcept {
    return a.hi == b.hi && a.lo == b.lo;
  }
  friend std::partial_ordering operator<=>(DoubleDouble a, DoubleDouble b) noexcept {
    if (auto c = a.hi <=> b.hi; c != 0) return c;
    return a.lo <=> b.lo;
  }
};

inline DoubleDouble abs(DoubleDouble a) noexcept { return a.hi < 0.0 ? -a : a; }

inline DoubleDouble ldexp(DoubleDouble a, int e) noexcept {
  return {std::ldexp(a.hi, e), std::ldexp(a.lo, e)};
}

// One Newton step on the double square root doubles its accuracy.
inline DoubleDouble sqrt(DoubleDouble a) noexcept {
  if (a.hi <= 0.0) return DoubleDouble(0.0);
  const double x = std::sqrt(a.hi);
  double p, e;
  eft::two_prod(x, x, p, e);
  const DoubleDouble residual = a - DoubleDouble(p, e);
  return DoubleDouble(x) + DoubleDouble(residual.hi / (2.0 * x));
}

}  // namespace jhsvd
