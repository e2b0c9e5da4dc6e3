#include <gtest/gtest.h>

#include <cmath>

#include <Eigen/QR>

#include "jhsvd/driver.hpp"
#include "jhsvd/error.hpp"
#include "jhsvd/testgen.hpp"
#include "oracle.hpp"

using namespace jhsvd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double eps = 0x1p-53;

std::int64_t total_rotations(const HsvdResult& r) {
  std::int64_t s = 0;
  for (const auto& st : r.stats) s += st.rotations;
  return s;
}

}  // namespace

TEST(BlockJacobi, DiagonalInput) {
  VectorXd d(8);
  d << 3, 8, 1, 5, 7, 2, 6, 4;
  SolverConfig cfg;
  cfg.block_width = 2;
  const auto r = block_jacobi(MatrixXd(d.asDiagonal()), {8}, cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.block_sweeps, 1);
  EXPECT_EQ(r.stats[0].proper_rotations, 0);
  VectorXd want(8);
  want << 8, 7, 6, 5, 4, 3, 2, 1;
  EXPECT_EQ(r.sigma, want);
}

TEST(BlockJacobi, ExactlyOrthogonalInput) {
  // Sylvester Hadamard / 8: entries and all partial sums exact
  MatrixXd H(1, 1);
  H(0, 0) = 1.0;
  while (H.rows() < 64) {
    const Index k = H.rows();
    MatrixXd T(2 * k, 2 * k);
    T << H, H, H, -H;
    H = T;
  }
  H /= 8.0;
  const auto r = block_jacobi(H, {64}, SolverConfig{});
  for (Index i = 0; i < 64; ++i) EXPECT_NEAR(r.sigma[i], 1.0, 4 * eps);
  const MatrixXd res = oracle::product(H, *r.V) - r.U * r.sigma.asDiagonal();
  EXPECT_LE(res.norm(), 100.0 * 64 * eps * H.norm());
}

TEST(BlockJacobi, OrthogonalInput) {
  const auto f = gen_factor(VectorXd::Ones(64), 4);
  SolverConfig cfg;
  const auto r = block_jacobi(f.G, f.J, cfg);
  ASSERT_TRUE(r.V.has_value());
  // the generated columns are orthonormal only to O(n eps)
  for (Index i = 0; i < 64; ++i) EXPECT_NEAR(r.sigma[i], 1.0, 100 * eps);
  // G V = U Sigma
  const MatrixXd res = oracle::product(f.G, *r.V) - r.U * r.sigma.asDiagonal();
  EXPECT_LE(res.norm(), 100.0 * 64 * eps * f.G.norm());
}

TEST(BlockJacobi, FixtureAccuracyAndResiduals) {
  const Index n = 256;
  const auto f = gen_factor(gen_spectrum({2, n, 2256}), 265);
  for (Variant v : {Variant::full_block, Variant::block_oriented}) {
    SolverConfig cfg;
    cfg.variant = v;
    const auto r = block_jacobi(f.G, f.J, cfg);
    EXPECT_TRUE(r.converged);
    EXPECT_LE(relative_error(r.sigma, r.J, f.lambda), 1e-13);
    EXPECT_GE(r.block_sweeps, 7);
    EXPECT_LE(r.block_sweeps, 14);
    const MatrixXd res = oracle::product(f.G, *r.V) - r.U * r.sigma.asDiagonal();
    EXPECT_LE(res.norm(), 100.0 * n * eps * f.G.norm());
    const MatrixXd UtU = oracle::gram(r.U, r.U);
    EXPECT_LE((UtU - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 100.0 * n * eps);
    const MatrixXd VtV = oracle::gram(*r.V, *r.V);
    EXPECT_LE((VtV - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 100.0 * n * eps);
  }
}

TEST(BlockJacobi, HyperbolicFixture) {
  const Index n = 64;
  const auto f = gen_factor(gen_spectrum({3, n, 64}), 3);
  ASSERT_GT(f.J.n_plus, 0);
  ASSERT_LT(f.J.n_plus, n);
  SolverConfig cfg;
  const auto r = block_jacobi(f.G, f.J, cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.J.n_plus, f.J.n_plus);
  EXPECT_LE(relative_error(r.sigma, r.J, f.lambda), 1e-12);
  VectorXd j = VectorXd::Ones(n);
  j.tail(n - f.J.n_plus).setConstant(-1.0);
  const MatrixXd J = j.asDiagonal();
  const MatrixXd VtJV = oracle::product(r.V->transpose(), oracle::product(J, *r.V));
  EXPECT_LE((VtJV - J).cwiseAbs().maxCoeff(), 100.0 * n * eps * r.V->squaredNorm() / n);
  const MatrixXd UtU = oracle::gram(r.U, r.U);
  EXPECT_LE((UtU - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 100.0 * n * eps);
  // sorted inside each class
  for (Index i = 1; i < n; ++i)
    if (i != f.J.n_plus) EXPECT_GE(r.sigma[i - 1], r.sigma[i]);
}

TEST(BlockJacobi, DeterministicAcrossWorkerCounts) {
  const auto f = gen_factor(gen_spectrum({1, 128, 5}), 6);
  SolverConfig cfg;
  cfg.workers = 1;
  const auto a = block_jacobi(f.G, f.J, cfg);
  for (int w : {2, 3, 8}) {
    cfg.workers = w;
    const auto b = block_jacobi(f.G, f.J, cfg);
    EXPECT_EQ(a.sigma, b.sigma) << w;
    EXPECT_EQ(*a.V, *b.V) << w;
    EXPECT_EQ(a.block_sweeps, b.block_sweeps);
  }
}

TEST(BlockJacobi, FullBlockRotatesMore) {
  const auto f = gen_factor(gen_spectrum({4, 128, 1}), 2);
  SolverConfig fb, bo;
  bo.variant = Variant::block_oriented;
  const auto a = block_jacobi(f.G, f.J, fb);
  const auto b = block_jacobi(f.G, f.J, bo);
  EXPECT_GE(static_cast<double>(total_rotations(a)) / static_cast<double>(total_rotations(b)), 1.5);
}

TEST(BlockJacobi, ShorteningPathsAgree) {
  const auto f = gen_factor(gen_spectrum({3, 128, 12}), 13);
  SolverConfig chol, qr;
  qr.shortening = Shortening::qr;
  const auto a = block_jacobi(f.G, f.J, chol);
  const auto b = block_jacobi(f.G, f.J, qr);
  for (Index i = 0; i < a.sigma.size(); ++i) EXPECT_NEAR(b.sigma[i] / a.sigma[i], 1.0, 1e-12);
}

TEST(BlockJacobi, SolveForVMatchesAccumulation) {
  const auto f = gen_factor(gen_spectrum({4, 64, 3}), 4);
  SolverConfig acc, sol;
  sol.solve_for_v = true;
  const auto a = block_jacobi(f.G, f.J, acc);
  const auto b = block_jacobi(f.G, f.J, sol);
  EXPECT_EQ(a.sigma, b.sigma);
  EXPECT_LE((*a.V - *b.V).cwiseAbs().maxCoeff(), 1e-11);
  // triangular input goes through back substitution
  MatrixXd R = f.G;
  Eigen::HouseholderQR<MatrixXd> qr(R);
  R = qr.matrixQR().triangularView<Eigen::Upper>();
  const auto c = block_jacobi(R, f.J, sol);
  const MatrixXd res = oracle::product(R, *c.V) - c.U * c.sigma.asDiagonal();
  EXPECT_LE(res.norm(), 100.0 * 64 * eps * R.norm());
}

TEST(BlockJacobi, Errors) {
  SolverConfig cfg;
  EXPECT_THROW(block_jacobi(MatrixXd::Identity(48, 48), {48}, cfg), InvalidArgument);  // 48 % 32 != 0
  MatrixXd tiny = MatrixXd::Identity(32, 32);
  tiny(0, 0) = 1e-200;
  EXPECT_THROW(block_jacobi(tiny, {32}, cfg), NumericError);
  MatrixXd huge = MatrixXd::Identity(32, 32);
  huge(3, 3) = 1e200;
  EXPECT_THROW(block_jacobi(huge, {32}, cfg), NumericError);
  EXPECT_THROW(block_jacobi(MatrixXd::Identity(32, 32), {33}, cfg), InvalidArgument);
}

TEST(SolveForV, Examples) {
  EXPECT_EQ(solve_for_V(MatrixXd::Identity(3, 3), MatrixXd::Constant(3, 2, 7.0)), MatrixXd::Constant(3, 2, 7.0));
  MatrixXd R(2, 2);
  R << 2, 1, 0, 2;
  EXPECT_EQ(solve_for_V(R, R), MatrixXd::Identity(2, 2));
  R(1, 1) = 0;
  EXPECT_THROW(solve_for_V(R, R), RankDeficiency);
}

TEST(SolveForV, RandomResidual) {
  oracle::Rng rng(5);
  const Index n = 32;
  MatrixXd R = rng.matrix(n, n).triangularView<Eigen::Upper>();
  R.diagonal().array() += 4.0;
  const MatrixXd W = rng.matrix(n, n);
  const MatrixXd V = solve_for_V(R, W);
  EXPECT_LE((oracle::product(R, V) - W).norm(), 4.0 * n * eps * W.norm());
}

TEST(ExtractSigma, Examples) {
  EXPECT_EQ(extract_sigma(MatrixXd::Identity(4, 4)), VectorXd::Ones(4));
  MatrixXd A = MatrixXd::Zero(5, 1);
  A(0, 0) = 3;
  A(1, 0) = 4;
  EXPECT_EQ(extract_sigma(A)[0], 5.0);
  MatrixXd B(3, 2);
  B << 0x1p510, 0x1p-510, 0x1p510, 0x1p-510, 0x1p510, 0x1p-510;
  const VectorXd s = extract_sigma(B);
  EXPECT_NEAR(s[0] / (std::sqrt(3.0) * 0x1p510), 1.0, 4 * eps);
  EXPECT_NEAR(s[1] / (std::sqrt(3.0) * 0x1p-510), 1.0, 4 * eps);
  EXPECT_THROW(extract_sigma(MatrixXd::Zero(3, 1)), RankDeficiency);
}
