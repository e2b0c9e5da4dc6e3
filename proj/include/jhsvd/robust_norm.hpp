#pragma once

// Overflow- and underflow-proof sums of squares and 2-norms, organized as a
// fixed-shape binary reduction so the result is reproducible and its error
// is bounded by the tree depth ceil(lg n).
//
// A ScaledSquare (j, y) stands for y * 2^j with j even, so its square root
// is sqrt(y) * 2^(j/2) without any rounding in the scale.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include <Eigen/Core>

namespace jhsvd {

struct FpParams {
  static constexpr double mu = std::numeric_limits<double>::min();  // smallest normal
  static constexpr double nu = std::numeric_limits<double>::max();
  static constexpr double eps = 0x1p-53;
  static constexpr double gamma = 1.0 - eps;
  static constexpr double delta = 1.0 + eps;
};

/// mu_tilde = ru(sqrt(mu / gamma)) and nu_hat = rz(sqrt(nu / delta_n)) with
/// delta_n = 2^L delta^(1 + L), L = ceil(lg n).  Squares of values in
/// [mu_tilde, nu_hat] neither underflow nor overflow in an n-term tree sum.
struct SafeBounds {
  double mu_tilde = 0.0;
  double nu_hat = 0.0;
};

SafeBounds safe_bounds(std::size_t n);

/// ceil(lg n), with ceil(lg 1) = 0.
int ceil_lg(std::size_t n) noexcept;

enum class ScaleDirection {
  up,    // smallest j with 2^j f >= t
  down,  // largest j with 2^j f <= t
};

/// Exact power-of-two exponent from the frexp decompositions of f and t.
int scale_exponent(double f, double t, ScaleDirection dir);

struct ScaledSquare {
  int scale_exp = 0;  // even
  double value = 0.0;

  /// value * 2^scale_exp; may overflow or underflow, for display only.
  [[nodiscard]] double to_double() const noexcept { return std::ldexp(value, scale_exp); }
  [[nodiscard]] bool is_zero() const noexcept { return value == 0.0; }
};

/// Rescales to 0.5 <= value < 2 keeping scale_exp even.  Zero passes through.
ScaledSquare common_form(ScaledSquare s) noexcept;

/// Sum of two common-form values.  The smaller one (lexicographically in
/// (scale_exp, value)) is brought to the larger one's scale before adding.
ScaledSquare add_scaled(ScaledSquare a, ScaledSquare b) noexcept;

struct SumSquaresOptions {
  /// Try a plain sum first when it provably neither overflows nor loses
  /// accuracy to underflow.  Off forces the partitioned, scaled path.
  bool fast_path = true;
};

/// Throws InvalidArgument for NaN or infinite components.
ScaledSquare sum_squares(std::span<const double> x, const SumSquaresOptions& opt = {});

/// ||x||_2 = sigma * 2^scale_exp.
struct ScaledNorm {
  int scale_exp = 0;
  double sigma = 0.0;
  [[nodiscard]] double to_double() const noexcept { return std::ldexp(sigma, scale_exp); }
};

ScaledNorm norm2(std::span<const double> x, const SumSquaresOptions& opt = {});

inline ScaledNorm norm2(const Eigen::Ref<const Eigen::VectorXd>& x, const SumSquaresOptions& opt = {}) {
  return norm2(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), opt);
}

/// Pairwise sum of f(0) + ... + f(n-1) over the fixed tree that splits a
/// range of length k at the largest power of two below k.
template <typename F>
double tree_sum(F&& f, std::size_t n) {
  struct Rec {
    F& f;
    double operator()(std::size_t lo, std::size_t len) const {
      if (len == 1) return f(lo);
      if (len == 2) return f(lo) + f(lo + 1);
      std::size_t half = 1;
      while (half * 2 < len) half *= 2;
      return (*this)(lo, half) + (*this)(lo + half, len - half);
    }
  };
  if (n == 0) return 0.0;
  return Rec{f}(0, n);
}

}  // namespace jhsvd
