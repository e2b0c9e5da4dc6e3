#include "jhsvd/testgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "jhsvd/error.hpp"

namespace jhsvd {

namespace {

// mt19937_64 with explicit transforms, so the stream does not depend on the
// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  double uniform() { return static_cast<double>(g_() >> 11) * 0x1p-53; }  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool coin() { return (g_() >> 63) != 0; }
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

 private:
  std::mt19937_64 g_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// M <- (I - tau v v^T) M on rows [r0, r0 + v.size()).
void reflect(ColumnMatrix& M, Index r0, const Eigen::VectorXd& v, double tau) {
  const Index len = v.size();
  for (Index j = 0; j < M.cols(); ++j) {
    double* m = M.col(j).data() + r0;
    double z = 0.0;
    for (Index i = 0; i < len; ++i) z = std::fma(v[i], m[i], z);
    const double f = -tau * z;
    for (Index i = 0; i < len; ++i) m[i] = std::fma(f, v[i], m[i]);
  }
}

// Applies `count` random reflectors of order len to rows [r0, r0 + len) of M.
void random_reflectors(ColumnMatrix& M, Index r0, Index len, Index count, Rng& rng) {
  if (len < 2) return;
  Eigen::VectorXd v(len);
  for (Index c = 0; c < count; ++c) {
    double vv = 0.0;
    for (Index i = 0; i < len; ++i) {
      v[i] = rng.normal();
      vv = std::fma(v[i], v[i], vv);
    }
    reflect(M, r0, v, 2.0 / vv);
  }
}

bool spectrum_less(double a, double b) {
  const bool pa = a > 0.0, pb = b > 0.0;
  if (pa != pb) return pa;
  return std::fabs(a) > std::fabs(b);
}

}  // namespace

Eigen::VectorXd gen_spectrum(const SpectrumSpec& spec) {
  const Index n = spec.n;
  if (n < 1) throw InvalidArgument("gen_spectrum: n must be positive");
  Rng rng(spec.seed);
  Eigen::VectorXd l(n);
  const double k = std::max(static_cast<double>(n) / 1024.0, 1.0);
  switch (spec.type) {
    case 1:
    case 2: {
      if (n < 16) throw InvalidArgument("gen_spectrum: types 1 and 2 need n >= 16");
      for (Index i = 0; i < 16; ++i) l[i] = 0.5;
      for (Index i = 16; i < n; ++i) {
        double x;
        do x = 0.1 * rng.normal();
        while (x == 0.0);
        l[i] = x;
      }
      if (spec.type == 2) {
        l.array() += 1.0;
        if (!(l.minCoeff() > 0.0)) throw NumericError("gen_spectrum: type 2 draw is not positive");
      }
      break;
    }
    case 3:
      for (Index i = 0; i < n; ++i) {
        const double x = rng.uniform(1e-7, 10.0 * k);
        l[i] = rng.coin() ? -x : x;
      }
      break;
    case 4:
      for (Index i = 0; i < n; ++i) l[i] = rng.uniform(1e-7, 10.0 * k);
      break;
    default:
      throw InvalidArgument("gen_spectrum: unknown spectrum type " + std::to_string(spec.type));
  }
  return l;
}

Index sort_spectrum(Eigen::VectorXd& values) {
  std::stable_sort(values.begin(), values.end(), spectrum_less);
  return static_cast<Index>(std::count_if(values.begin(), values.end(), [](double x) { return x > 0.0; }));
}

TestFactor gen_factor(const Eigen::VectorXd& lambda, std::uint64_t seed) {
  const Index n = lambda.size();
  if (n < 1) throw InvalidArgument("gen_factor: empty spectrum");
  if (!lambda.allFinite() || (lambda.array() == 0.0).any())
    throw InvalidArgument("gen_factor: eigenvalues must be finite and nonzero");
  TestFactor f;
  f.lambda = lambda;
  f.J.n_plus = sort_spectrum(f.lambda);
  const Index np = f.J.n_plus, nm = n - np;
  Rng rng(seed ^ 0x6a09e667f3bcc908ULL);

  // Z = diag(A+, A-) H diag(B+, B-), H a set of disjoint hyperbolic
  // rotations with |tanh| <= 1/2, so cond(Z) <= 3.
  ColumnMatrix Z = ColumnMatrix::Identity(n, n);
  random_reflectors(Z, 0, np, np, rng);
  random_reflectors(Z, np, nm, nm, rng);
  for (Index i = 0; i < std::min(np, nm); ++i) {
    const double th = rng.uniform(-0.5, 0.5);
    const double ch = 1.0 / std::sqrt(std::fma(-th, th, 1.0));
    const double sh = ch * th;
    const Index a = i, b = np + i;
    for (Index j = 0; j < n; ++j) {
      const double x = Z(a, j), y = Z(b, j);
      Z(a, j) = std::fma(ch, x, sh * y);
      Z(b, j) = std::fma(sh, x, ch * y);
    }
  }
  random_reflectors(Z, 0, np, np, rng);
  random_reflectors(Z, np, nm, nm, rng);

  f.V = Z.transpose();
  f.V.topRightCorner(np, nm) *= -1.0;
  f.V.bottomLeftCorner(nm, np) *= -1.0;

  for (Index i = 0; i < n; ++i) Z.row(i) *= std::sqrt(std::fabs(f.lambda[i]));

  ColumnMatrix Q = ColumnMatrix::Identity(n, n);
  random_reflectors(Q, 0, n, n, rng);
  f.G = postmultiply(Q, Z);
  return f;
}

TestFactor make_fixture(int type, Index n, std::uint64_t base_seed) {
  const auto un = static_cast<std::uint64_t>(n), ut = static_cast<std::uint64_t>(type);
  return gen_factor(gen_spectrum({type, n, base_seed + 1000 * ut + un}), base_seed + 7 + un + ut);
}

double relative_error(const Eigen::VectorXd& sigma, Signature J, const Eigen::VectorXd& lambda) {
  const Index n = sigma.size();
  if (lambda.size() != n) throw InvalidArgument("relative_error: length mismatch");
  if ((lambda.array() == 0.0).any()) throw InvalidArgument("relative_error: zero eigenvalue");
  Eigen::VectorXd mu(n);
  for (Index i = 0; i < n; ++i) mu[i] = (J.positive(i) ? 1.0 : -1.0) * sigma[i] * sigma[i];
  Eigen::VectorXd l = lambda;
  sort_spectrum(mu);
  sort_spectrum(l);
  double worst = 0.0;
  for (Index i = 0; i < n; ++i) worst = std::max(worst, std::fabs(mu[i] - l[i]) / std::fabs(l[i]));
  return worst;
}

}  // namespace jhsvd
