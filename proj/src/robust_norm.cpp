#include "jhsvd/robust_norm.hpp"

#include <algorithm>
#include <array>
#include <bit>

#include "jhsvd/double_double.hpp"
#include "jhsvd/error.hpp"

namespace jhsvd {

namespace {

// sqrt(a * 2^(2k)) in double-double, rounded up or toward zero, for a in a
// comfortable range; the caller keeps the power of two outside.
double directed_sqrt(DoubleDouble a, int k, bool round_up) {
  const DoubleDouble r = sqrt(a);
  double v = r.hi;
  const double rest = r.lo;
  if (round_up && rest > 0.0) v = std::nextafter(v, std::numeric_limits<double>::infinity());
  if (!round_up && rest < 0.0) v = std::nextafter(v, 0.0);
  return std::ldexp(v, k);
}

}  // namespace

int ceil_lg(std::size_t n) noexcept {
  if (n <= 1) return 0;
  return static_cast<int>(std::bit_width(n - 1));
}

SafeBounds safe_bounds(std::size_t n) {
  if (n == 0) n = 1;
  const int L = ceil_lg(n);
  const DoubleDouble gamma = DoubleDouble(1.0) - DoubleDouble(FpParams::eps);
  DoubleDouble delta_n(std::ldexp(1.0, L));
  const DoubleDouble delta = DoubleDouble(1.0) + DoubleDouble(FpParams::eps);
  for (int i = 0; i <= L; ++i) delta_n *= delta;
  // mu / gamma = 2^-1022 / gamma: keep 2^-1022 = 2^-1100 * 2^78 outside.
  const double mu_tilde = directed_sqrt(DoubleDouble(0x1p78) / gamma, -550, true);
  // nu / delta_n = (nu * 2^-1024) / delta_n * 2^1024
  const double nu_hat = directed_sqrt(DoubleDouble(std::ldexp(FpParams::nu, -1024)) / delta_n, 512, false);
  return {mu_tilde, nu_hat};
}

int scale_exponent(double f, double t, ScaleDirection dir) {
  if (!(f > 0.0) || !(t > 0.0) || !std::isfinite(f) || !std::isfinite(t))
    throw InvalidArgument("scale_exponent: arguments must be positive and finite");
  int fe = 0, te = 0;
  const double fy = std::frexp(f, &fe);
  const double ty = std::frexp(t, &te);
  if (dir == ScaleDirection::up) return (te - fe) + (fy < ty ? 1 : 0);
  return (te - fe) - (fy > ty ? 1 : 0);
}

ScaledSquare common_form(ScaledSquare s) noexcept {
  if (s.value == 0.0) return s;
  int e = 0;
  const double y = std::frexp(s.value, &e);  // value = y 2^e, 0.5 <= y < 1
  // value = (2y) 2^m with 1 <= 2y < 2
  const int m = e - 1;
  const int m_prime = -(((m % 2) + 2) % 2);
  return {s.scale_exp + m - m_prime, std::ldexp(2.0 * y, m_prime)};
}

ScaledSquare add_scaled(ScaledSquare a, ScaledSquare b) noexcept {
  if (a.value == 0.0) return b;
  if (b.value == 0.0) return a;
  auto lex_less = [](const ScaledSquare& x, const ScaledSquare& y) {
    return x.scale_exp < y.scale_exp || (x.scale_exp == y.scale_exp && x.value < y.value);
  };
  if (lex_less(b, a)) std::swap(a, b);  // a <= b
  const int diff = a.scale_exp - b.scale_exp;
  // Below 2^-60 relative the smaller addend cannot change a value in
  // [0.5, 2); skipping it also avoids underflowing the rescale.
  if (diff < -60) return b;
  return {b.scale_exp, std::ldexp(a.value, diff) + b.value};
}

ScaledSquare sum_squares(std::span<const double> x, const SumSquaresOptions& opt) {
  const std::size_t n = x.size();
  double M = 0.0;
  double m = FpParams::nu;
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidArgument("sum_squares: non-finite component");
    const double a = std::fabs(v);
    M = std::max(M, a);
    if (a > 0.0) m = std::min(m, a);
  }
  if (M == 0.0) return {};

  const SafeBounds b = safe_bounds(n);
  // m >= 2^-511 is the same test as rn(m^2) >= mu, without risking an
  // underflow exception while evaluating it.
  if (opt.fast_path && M <= b.nu_hat && m >= 0x1p-511) {
    return {0, tree_sum([&](std::size_t i) { return x[i] * x[i]; }, n)};
  }

  std::array<ScaledSquare, 3> parts{};
  std::size_t count = 0;
  if (m <= b.nu_hat && M >= b.mu_tilde) {
    const double s1 = tree_sum(
        [&](std::size_t i) {
          const double a = std::fabs(x[i]);
          return (a >= b.mu_tilde && a <= b.nu_hat) ? x[i] * x[i] : 0.0;
        },
        n);
    if (s1 > 0.0) parts[count++] = {0, s1};
  }
  if (M > b.nu_hat) {
    const int l = scale_exponent(M, b.nu_hat, ScaleDirection::down);
    const double s2 = tree_sum(
        [&](std::size_t i) {
          if (std::fabs(x[i]) <= b.nu_hat) return 0.0;
          const double y = std::ldexp(x[i], l);
          return y * y;
        },
        n);
    parts[count++] = {-2 * l, s2};
  }
  if (m < b.mu_tilde) {
    const int k = scale_exponent(m, b.mu_tilde, ScaleDirection::up);
    const double s0 = tree_sum(
        [&](std::size_t i) {
          if (x[i] == 0.0 || std::fabs(x[i]) >= b.mu_tilde) return 0.0;
          const double y = std::ldexp(x[i], k);
          return y * y;
        },
        n);
    parts[count++] = {-2 * k, s0};
  }
  if (count == 1) return parts[0];

  for (std::size_t i = 0; i < count; ++i) parts[i] = common_form(parts[i]);
  std::sort(parts.begin(), parts.begin() + static_cast<std::ptrdiff_t>(count),
            [](const ScaledSquare& p, const ScaledSquare& q) {
              return p.scale_exp < q.scale_exp || (p.scale_exp == q.scale_exp && p.value < q.value);
            });
  ScaledSquare acc = add_scaled(parts[0], parts[1]);
  if (count == 3) acc = add_scaled(common_form(acc), parts[2]);
  return common_form(acc);
}

ScaledNorm norm2(std::span<const double> x, const SumSquaresOptions& opt) {
  const ScaledSquare s = sum_squares(x, opt);
  if (s.value == 0.0) return {};
  return {s.scale_exp / 2, std::sqrt(s.value)};
}

}  // namespace jhsvd
