#include <gtest/gtest.h>

#include <cfenv>
#include <cmath>
#include <numeric>

#include "jhsvd/error.hpp"
#include "jhsvd/robust_norm.hpp"
#include "oracle.hpp"

using namespace jhsvd;

namespace {

constexpr double eps = 0x1p-53;
constexpr double mu = FpParams::mu;
constexpr double nu = FpParams::nu;

double bound(std::size_t n) { return std::ldexp(1.0, 1 + ceil_lg(n)) * eps; }

std::vector<double> stress_vector(oracle::Rng& rng, std::size_t n, int emin, int emax) {
  std::vector<double> x(n);
  for (auto& v : x) {
    const int e = emin + static_cast<int>(rng.next() % static_cast<std::uint64_t>(emax - emin + 1));
    v = std::ldexp(rng.symmetric(), e);
  }
  return x;
}

}  // namespace

TEST(SafeBounds, Definitions) {
  // one term: delta_1 = delta, nu_hat = rz(sqrt(nu / delta))
  const auto b1 = safe_bounds(1);
  const long double ref1 = std::sqrt(static_cast<long double>(nu) / (1.0L + 0x1p-53L));
  EXPECT_LE(static_cast<long double>(b1.nu_hat), ref1);
  EXPECT_GT(static_cast<long double>(std::nextafter(b1.nu_hat, INFINITY)), ref1);
  // two terms: delta_2 = 2 delta^2, nu_hat ~ sqrt(nu) / sqrt(2)
  const auto b2 = safe_bounds(2);
  EXPECT_NEAR(b2.nu_hat / (std::sqrt(nu) / std::sqrt(2.0)), 1.0, 4 * eps);

  for (std::size_t n : {1UL, 2UL, 3UL, 1000UL, 1UL << 20}) {
    const auto b = safe_bounds(n);
    // mu_tilde^2 gamma >= mu, computed exactly in double-double at scale 2^1100
    const DoubleDouble mt = ldexp(DoubleDouble(b.mu_tilde), 550);
    const DoubleDouble lhs = mt * mt * (DoubleDouble(1.0) - DoubleDouble(eps));
    EXPECT_GE(lhs.to_double(), 0x1p78);
    // and mu_tilde is the smallest such double
    const DoubleDouble below = ldexp(DoubleDouble(std::nextafter(b.mu_tilde, 0.0)), 550);
    EXPECT_LT((below * below * (DoubleDouble(1.0) - DoubleDouble(eps))).to_double(), 0x1p78);
  }
}

TEST(SafeBounds, Order1024AgainstLongDouble) {
  const auto b = safe_bounds(1024);
  long double dn = 1024.0L;
  for (int i = 0; i < 11; ++i) dn *= 1.0L + 0x1p-53L;
  const long double ref = std::sqrt(static_cast<long double>(nu) / dn);
  EXPECT_LE(static_cast<long double>(b.nu_hat), ref);
  EXPECT_GT(static_cast<long double>(std::nextafter(b.nu_hat, INFINITY)), ref);
}

TEST(ScaleExponent, Examples) {
  EXPECT_EQ(scale_exponent(3.0, 3.0, ScaleDirection::up), 0);
  EXPECT_EQ(scale_exponent(3.0, 3.0, ScaleDirection::down), 0);
  const double f = 1.5 * 0x1p-100, t = 0x1p-50;
  const int j = scale_exponent(f, t, ScaleDirection::down);
  EXPECT_EQ(j, 49);
  EXPECT_LE(std::ldexp(f, j), t);
  EXPECT_GT(std::ldexp(f, j + 1), t);
  EXPECT_EQ(scale_exponent(0x1p10, 1.5 * 0x1p10, ScaleDirection::up), 1);
  EXPECT_THROW(scale_exponent(0.0, 1.0, ScaleDirection::up), InvalidArgument);
  EXPECT_THROW(scale_exponent(1.0, -1.0, ScaleDirection::up), InvalidArgument);
}

TEST(ScaleExponent, DefiningInequalities) {
  oracle::Rng rng(5);
  for (int i = 0; i < 20000; ++i) {
    const double f = std::ldexp(0.5 + 0.5 * rng.uniform(), static_cast<int>(rng.next() % 2000) - 1070);
    const double t = std::ldexp(0.5 + 0.5 * rng.uniform(), static_cast<int>(rng.next() % 2000) - 1000);
    if (f == 0.0) continue;
    // brute force in long double-free form: compare exponents via ldexp on the significands
    int fe, te;
    const double fy = std::frexp(f, &fe), ty = std::frexp(t, &te);
    auto ge = [&](int j) { return fe + j > te || (fe + j == te && fy >= ty); };  // 2^j f >= t
    auto le = [&](int j) { return fe + j < te || (fe + j == te && fy <= ty); };  // 2^j f <= t
    const int up = scale_exponent(f, t, ScaleDirection::up);
    EXPECT_TRUE(ge(up) && !ge(up - 1));
    const int down = scale_exponent(f, t, ScaleDirection::down);
    EXPECT_TRUE(le(down) && !le(down + 1));
  }
}

TEST(CommonForm, Examples) {
  const auto c = common_form({0, 25.0});
  EXPECT_EQ(c.scale_exp, 4);
  EXPECT_EQ(c.value, 1.5625);
  const auto one = common_form({0, 1.0});
  EXPECT_EQ(one.scale_exp, 0);
  EXPECT_EQ(one.value, 1.0);
  const auto z = common_form({6, 0.0});
  EXPECT_EQ(z.value, 0.0);
  oracle::Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const ScaledSquare s{2 * (static_cast<int>(rng.next() % 2001) - 1000),
                         std::ldexp(1.0 + rng.uniform(), static_cast<int>(rng.next() % 1000) - 500)};
    const auto cf = common_form(s);
    EXPECT_EQ(cf.scale_exp % 2, 0);
    EXPECT_GE(cf.value, 0.5);
    EXPECT_LT(cf.value, 2.0);
    // same number: compare at a common scale
    EXPECT_EQ(std::ldexp(cf.value, cf.scale_exp - s.scale_exp), s.value);
  }
}

TEST(AddScaled, Examples) {
  const ScaledSquare one{0, 1.0};
  const auto z = add_scaled({}, one);
  EXPECT_EQ(z.value, 1.0);
  EXPECT_EQ(z.scale_exp, 0);
  const auto two = add_scaled(one, one);
  EXPECT_EQ(two.to_double(), 2.0);
  const auto absorbed = add_scaled({-200, 1.0}, one);
  EXPECT_EQ(absorbed.scale_exp, 0);
  const DoubleDouble ref = DoubleDouble(1.0) + DoubleDouble(0x1p-200);
  EXPECT_LE(std::fabs((DoubleDouble(absorbed.value) - ref).to_double()), 0x1p-52);
  // order does not matter
  const auto a = add_scaled({4, 1.5}, {2, 0.75});
  const auto b = add_scaled({2, 0.75}, {4, 1.5});
  EXPECT_EQ(a.scale_exp, b.scale_exp);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.to_double(), 16 * 1.5 + 4 * 0.75);
}

TEST(SumSquares, Small) {
  const std::vector<double> x{3.0, 4.0};
  const auto s = sum_squares(x);
  EXPECT_EQ(s.to_double(), 25.0);
  EXPECT_EQ(norm2(x).to_double(), 5.0);
  EXPECT_TRUE(sum_squares(std::vector<double>{}).is_zero());
  EXPECT_TRUE(sum_squares(std::vector<double>{0.0, -0.0, 0.0}).is_zero());
  EXPECT_EQ(norm2(std::vector<double>{0.0, 0.0}).to_double(), 0.0);
  EXPECT_THROW(sum_squares(std::vector<double>{1.0, NAN}), InvalidArgument);
  EXPECT_THROW(sum_squares(std::vector<double>{INFINITY}), InvalidArgument);
}

TEST(SumSquares, HugeEntries) {
  const std::vector<double> x{nu / 2, nu / 2};
  // naive evaluation overflows
  EXPECT_TRUE(std::isinf(x[0] * x[0] + x[1] * x[1]));
  const auto s = sum_squares(x);
  EXPECT_TRUE(std::isfinite(s.value));
  EXPECT_LE(oracle::rel_error_scaled(s.value, s.scale_exp, oracle::sum_squares(x)), 4 * eps);
  const auto r = norm2(x);
  // (nu/2) sqrt(2) at scale 2^-1023
  const double expect = std::ldexp(nu / 2, -1023) * std::sqrt(2.0);
  EXPECT_NEAR(std::ldexp(r.sigma, r.scale_exp - 1023) / expect, 1.0, 4 * eps);
}

TEST(SumSquares, ThresholdCopies) {
  for (std::size_t n : {1UL, 7UL, 64UL, 1000UL, 4096UL}) {
    const std::vector<double> x(n, mu);
    const auto r = norm2(x);
    // sqrt(n) mu, compared at scale 2^1022
    const double got = std::ldexp(r.sigma, r.scale_exp + 1022);
    const double ref = std::sqrt(static_cast<double>(n));
    EXPECT_LE(std::fabs(got - ref) / ref, (2 + ceil_lg(n)) * eps) << n;
  }
}

TEST(SumSquares, ThreePartialSums) {
  // values above nu_hat, inside the safe range, and below mu_tilde at once
  std::vector<double> x{0x1p600, -0x1p590, 3.0, 0.5, 0x1p-600, -0x1p-1070, 0x1p-1000};
  const auto s = sum_squares(x);
  EXPECT_LE(oracle::rel_error_scaled(s.value, s.scale_exp, oracle::sum_squares(x)), bound(x.size()));
  EXPECT_GE(s.value, 0.5);
  EXPECT_LT(s.value, 2.0);
  // tiny-only vector, where the tiny partial sum carries everything
  std::vector<double> t{0x1p-1060, 0x1p-1070, 0x1p-1074, 3 * 0x1p-1050};
  const auto st = sum_squares(t);
  EXPECT_LE(oracle::rel_error_scaled(st.value, st.scale_exp, oracle::sum_squares(t)), bound(t.size()));
}

TEST(SumSquares, FastAndScaledPathsAgree) {
  oracle::Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    auto x = stress_vector(rng, 1 + rng.next() % 500, -100, 100);
    const auto fast = sum_squares(x);
    const auto slow = sum_squares(x, {.fast_path = false});
    const DoubleDouble a = ldexp(DoubleDouble(fast.value), fast.scale_exp);
    const DoubleDouble b = ldexp(DoubleDouble(slow.value), slow.scale_exp);
    EXPECT_LE(std::fabs((a - b).to_double()) / b.to_double(), 4 * eps);
  }
}

TEST(SumSquares, StressAgainstOracle) {
  oracle::Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = 1 + rng.next() % 3000;
    auto x = stress_vector(rng, n, -1020, 1020);
    if (i % 3 == 0) x[rng.next() % n] = 0.0;
    std::feclearexcept(FE_ALL_EXCEPT);
    const auto s = sum_squares(x);
    const bool flagged = std::fetestexcept(FE_OVERFLOW | FE_UNDERFLOW | FE_INVALID) != 0;
    EXPECT_FALSE(flagged);
    const double err = oracle::rel_error_scaled(s.value, s.scale_exp, oracle::sum_squares(x));
    EXPECT_LE(err, bound(n));
    worst = std::max(worst, err / bound(n));
  }
  RecordProperty("worst_fraction_of_bound", std::to_string(worst));
}

TEST(SumSquares, DeterministicAndPermutationStable) {
  oracle::Rng rng(77);
  auto x = stress_vector(rng, 1000, -600, 600);
  const auto a = sum_squares(x);
  const auto b = sum_squares(x);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.scale_exp, b.scale_exp);
  std::reverse(x.begin(), x.end());
  const auto c = sum_squares(x);
  const DoubleDouble da = ldexp(DoubleDouble(a.value), a.scale_exp - c.scale_exp);
  EXPECT_LE(std::fabs((da - DoubleDouble(c.value)).to_double()) / c.value, 2 * bound(x.size()));
}

TEST(TreeSum, ShapeIsFixed) {
  // (1 + 2^-53) + ... depends on association; the fixed tree pairs (0,1),(2,3)
  const std::vector<double> v{1.0, 0x1p-53, 0x1p-53, 0x1p-53};
  const double s = tree_sum([&](std::size_t i) { return v[i]; }, v.size());
  EXPECT_EQ(s, (1.0 + 0x1p-53) + (0x1p-53 + 0x1p-53));
  EXPECT_EQ(ceil_lg(1), 0);
  EXPECT_EQ(ceil_lg(2), 1);
  EXPECT_EQ(ceil_lg(3), 2);
  EXPECT_EQ(ceil_lg(1024), 10);
  EXPECT_EQ(ceil_lg(1025), 11);
}
