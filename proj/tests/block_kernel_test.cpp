#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include <Eigen/SVD>

#include "jhsvd/block_kernel.hpp"
#include "jhsvd/error.hpp"
#include "jhsvd/robust_norm.hpp"
#include "oracle.hpp"

using namespace jhsvd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double eps = 0x1p-53;

std::vector<Index> iota_map(Index k, Index offset = 0) {
  std::vector<Index> m(static_cast<std::size_t>(k));
  std::iota(m.begin(), m.end(), offset);
  return m;
}

PStrategy inner_strategy(int k) { return make_pstrategy(StrategyKind::reversed_row, k); }

MatrixXd random_upper(oracle::Rng& rng, Index k) {
  MatrixXd R = rng.matrix(k, k).triangularView<Eigen::Upper>();
  for (Index i = 0; i < k; ++i) R(i, i) = 2.0 + rng.uniform();
  return R;
}

}  // namespace

TEST(Gram, Examples) {
  MatrixXd G = MatrixXd::Zero(20, 4);
  G.topRows(4).setIdentity();
  const MatrixXd H = gram(G);
  EXPECT_EQ(MatrixXd(H.triangularView<Eigen::Lower>()), MatrixXd::Identity(4, 4));

  MatrixXd E = MatrixXd::Zero(3, 2);
  E(0, 0) = E(0, 1) = 1.0;
  const MatrixXd h = gram(E);
  EXPECT_EQ(h(0, 0), 1.0);
  EXPECT_EQ(h(1, 0), 1.0);
  EXPECT_EQ(h(1, 1), 1.0);
  EXPECT_THROW(gram(MatrixXd::Zero(3, 4)), InvalidArgument);
}

TEST(Gram, AgainstOracle) {
  oracle::Rng rng(3);
  const MatrixXd G = rng.matrix(64, 8);
  const MatrixXd H = gram(G);
  const MatrixXd ref = oracle::gram(G, G);
  const double tol = std::ldexp(eps, 1 + ceil_lg(64));
  for (Index j = 0; j < 8; ++j)
    for (Index i = j; i < 8; ++i)
      EXPECT_LE(std::fabs(H(i, j) - ref(i, j)), tol * G.col(i).norm() * G.col(j).norm()) << i << "," << j;
}

TEST(Gram, ChunkingDoesNotChangeBits) {
  // one sequential fma chain per entry, whatever the chunk length
  oracle::Rng rng(4);
  const MatrixXd G = rng.matrix(100, 6);
  const MatrixXd H = gram(G);
  for (Index j = 0; j < 6; ++j)
    for (Index i = j; i < 6; ++i) {
      double s = 0.0;
      for (Index r = 0; r < 100; ++r) s = std::fma(G(r, i), G(r, j), s);
      EXPECT_EQ(H(i, j), s);
    }
}

TEST(Cholesky, Examples) {
  MatrixXd I = MatrixXd::Identity(5, 5);
  cholesky_in_place(I);
  EXPECT_EQ(I, MatrixXd::Identity(5, 5));

  MatrixXd H(2, 2);
  H << 4, 2, 2, 5;
  cholesky_in_place(H);
  MatrixXd R(2, 2);
  R << 2, 1, 0, 2;
  EXPECT_EQ(H, R);
}

TEST(Cholesky, ReadsOnlyLowerTriangle) {
  MatrixXd H(2, 2);
  H << 4, 99, 2, 5;
  cholesky_in_place(H);
  EXPECT_EQ(H(0, 1), 1.0);
  EXPECT_EQ(H(1, 1), 2.0);
}

TEST(Cholesky, RandomResidual) {
  oracle::Rng rng(8);
  const Index n = 32;
  const MatrixXd A = rng.matrix(n, n);
  MatrixXd H = oracle::gram(A, A) + static_cast<double>(n) * MatrixXd::Identity(n, n);
  const MatrixXd H0 = H;
  cholesky_in_place(H);
  EXPECT_TRUE((H.triangularView<Eigen::StrictlyLower>().toDenseMatrix().array() == 0.0).all());
  const MatrixXd res = oracle::gram(H, H) - H0;
  EXPECT_LE(res.norm(), 10.0 * n * eps * H0.norm());
}

TEST(Cholesky, RankDeficiencyReportsPivot) {
  MatrixXd H(3, 3);
  H << 1, 0, 0,  //
      1, 1, 0,   //
      0, 0, 1;
  try {
    cholesky_in_place(H);
    FAIL() << "expected RankDeficiency";
  } catch (const RankDeficiency& e) {
    EXPECT_EQ(e.index(), 1);
  }
}

TEST(QrPeeloff, Examples) {
  oracle::Rng rng(1);
  const MatrixXd R = random_upper(rng, 8);
  const MatrixXd Q = qr_peeloff(R);
  EXPECT_LE((Q - R).cwiseAbs().maxCoeff(), 4 * eps * R.cwiseAbs().maxCoeff());

  MatrixXd II(8, 4);
  II << MatrixXd::Identity(4, 4), MatrixXd::Identity(4, 4);
  const MatrixXd S = qr_peeloff(II);
  EXPECT_LE((S - std::sqrt(2.0) * MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 2 * eps);
  EXPECT_THROW(qr_peeloff(MatrixXd::Zero(10, 4)), InvalidArgument);
}

TEST(QrPeeloff, GramResidualAndNonnegativeDiagonal) {
  oracle::Rng rng(12);
  const MatrixXd G = rng.matrix(128, 16);
  const MatrixXd R = qr_peeloff(G);
  EXPECT_TRUE((R.triangularView<Eigen::StrictlyLower>().toDenseMatrix().array() == 0.0).all());
  EXPECT_TRUE((R.diagonal().array() >= 0.0).all());
  const MatrixXd GtG = oracle::gram(G, G);
  EXPECT_LE((oracle::gram(R, R) - GtG).norm(), 20.0 * 128 * eps * GtG.norm());
}

TEST(QrPeeloff, MatchesCholeskyFactor) {
  // both shortenings reproduce the same Gram matrix, hence (with positive
  // diagonals) the same triangular factor up to rounding
  oracle::Rng rng(13);
  const MatrixXd G = rng.matrix(96, 32);
  MatrixXd Rc = gram(G);
  cholesky_in_place(Rc);
  const MatrixXd Rq = qr_peeloff(G);
  EXPECT_LE((Rc - Rq).norm() / Rq.norm(), 1e-12);
}

TEST(InnerJacobi, DiagonalNeedsNoRotation) {
  MatrixXd R = MatrixXd::Zero(4, 4);
  R.diagonal() << 4, 3, 2, 1;
  const auto map = iota_map(4);
  const auto res = inner_jacobi(R, map, {4}, inner_strategy(4));
  EXPECT_EQ(res.rotations, 0);
  EXPECT_EQ(res.proper_rotations, 0);
  EXPECT_EQ(res.inner_sweeps, 1);
  EXPECT_EQ(res.V_acc, MatrixXd::Identity(4, 4));
  EXPECT_EQ(res.R_out, R);
}

TEST(InnerJacobi, GoldenRatio) {
  MatrixXd R(2, 2);
  R << 1, 1, 0, 1;
  const auto map = iota_map(2);
  const auto res = inner_jacobi(R, map, {2}, inner_strategy(2), {.max_sweeps = 30});
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const double s0 = norm2(res.R_out.col(0)).to_double();
  const double s1 = norm2(res.R_out.col(1)).to_double();
  EXPECT_NEAR(s0 / phi, 1.0, 4 * eps);
  EXPECT_NEAR(s1 * phi, 1.0, 4 * eps);
  EXPECT_GE(res.rotations, 1);
}

TEST(InnerJacobi, BlockOrientedRunsExactlyOneSweep) {
  oracle::Rng rng(21);
  const MatrixXd R = random_upper(rng, 32);
  const auto map = iota_map(32);
  const auto res = inner_jacobi(R, map, {32}, inner_strategy(32), {.max_sweeps = 1});
  EXPECT_EQ(res.inner_sweeps, 1);
  EXPECT_EQ(res.rotations, 32 * 31 / 2);
}

TEST(InnerJacobi, TrigConvergedProperties) {
  oracle::Rng rng(22);
  const Index k = 32;
  const MatrixXd R = random_upper(rng, k);
  const auto map = iota_map(k);
  const auto res = inner_jacobi(R, map, {k}, inner_strategy(static_cast<int>(k)));
  ASSERT_LT(res.inner_sweeps, 30);
  EXPECT_GE(res.rotations, res.proper_rotations);

  // stopping test re-applied in extended precision
  const double c = eps * std::sqrt(static_cast<double>(k));
  const MatrixXd H = oracle::gram(res.R_out, res.R_out);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < j; ++i) EXPECT_LE(std::fabs(H(i, j)), 2 * c * std::sqrt(H(i, i) * H(j, j)));

  const MatrixXd VtV = oracle::gram(res.V_acc, res.V_acc);
  EXPECT_LE((VtV - MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff(), 50.0 * k * eps);
  const MatrixXd RV = oracle::product(R, res.V_acc);
  EXPECT_LE((RV - res.R_out).norm(), 50.0 * k * eps * R.norm());

  // non-increasing column norms
  for (Index j = 1; j < k; ++j) EXPECT_GE(H(j - 1, j - 1), H(j, j)) << j;

  // singular values against Eigen's SVD of R
  Eigen::JacobiSVD<MatrixXd> svd(R);
  for (Index j = 0; j < k; ++j) EXPECT_NEAR(std::sqrt(H(j, j)) / svd.singularValues()(j), 1.0, 1e-13);
}

TEST(InnerJacobi, HyperbolicConvergedProperties) {
  oracle::Rng rng(23);
  const Index k = 16;
  const Index offset = 40, n_plus = 48;  // local columns 0..7 positive, 8..15 negative
  const MatrixXd R = random_upper(rng, k);
  const auto map = iota_map(k, offset);
  const auto res = inner_jacobi(R, map, {n_plus}, inner_strategy(static_cast<int>(k)));
  ASSERT_LT(res.inner_sweeps, 30);
  VectorXd j = VectorXd::Ones(k);
  j.tail(8).setConstant(-1.0);
  const MatrixXd J = j.asDiagonal();
  const MatrixXd VtJV = oracle::product(res.V_acc.transpose(), J * res.V_acc);
  const double kappa = res.V_acc.norm() * res.V_acc.norm();
  EXPECT_LE((VtJV - J).cwiseAbs().maxCoeff(), 50.0 * k * eps * kappa);
  const MatrixXd H = oracle::gram(res.R_out, res.R_out);
  const double c = eps * std::sqrt(static_cast<double>(k));
  for (Index q = 0; q < k; ++q)
    for (Index p = 0; p < q; ++p) EXPECT_LE(std::fabs(H(p, q)), 2 * c * std::sqrt(H(p, p) * H(q, q)));
  // the positive block is sorted non-increasingly, the negative one non-decreasingly
  for (Index i = 1; i < 8; ++i) EXPECT_GE(H(i - 1, i - 1), H(i, i));
  for (Index i = 9; i < k; ++i) EXPECT_LE(H(i - 1, i - 1), H(i, i));
}

TEST(InnerJacobi, Errors) {
  MatrixXd R = MatrixXd::Identity(4, 4);
  R(0, 1) = 0.5;
  R.col(2).setZero();
  const auto map = iota_map(4, 10);
  try {
    inner_jacobi(R, map, {20}, inner_strategy(4));
    FAIL() << "expected RankDeficiency";
  } catch (const RankDeficiency& e) {
    EXPECT_EQ(e.index(), 12);
  }
  EXPECT_THROW(inner_jacobi(MatrixXd::Identity(4, 4), map, {4}, inner_strategy(6)), InvalidArgument);
  EXPECT_THROW(inner_jacobi(MatrixXd::Identity(4, 4), map, {4}, inner_strategy(4), {.max_sweeps = 0}),
               InvalidArgument);
}

TEST(Postmultiply, Examples) {
  oracle::Rng rng(30);
  const MatrixXd A = rng.matrix(10, 4);
  EXPECT_EQ(postmultiply(A, MatrixXd::Identity(4, 4)), A);
  const MatrixXd B = rng.matrix(6, 2);
  MatrixXd P(2, 2);
  P << 0, 1, 1, 0;
  const MatrixXd C = postmultiply(B, P);
  EXPECT_EQ(C.col(0), B.col(1));
  EXPECT_EQ(C.col(1), B.col(0));
  EXPECT_THROW(postmultiply(A, MatrixXd::Identity(3, 3)), InvalidArgument);
}

TEST(Postmultiply, AgainstOracle) {
  oracle::Rng rng(31);
  const Index k = 32;
  const MatrixXd A = rng.matrix(96, k);
  const MatrixXd V = rng.matrix(k, k);
  const MatrixXd C = postmultiply(A, V);
  const MatrixXd ref = oracle::product(A, V);
  const double tol = std::ldexp(eps, 1 + ceil_lg(static_cast<std::size_t>(k)));
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < A.rows(); ++i)
      EXPECT_LE(std::fabs(C(i, j) - ref(i, j)), tol * A.row(i).norm() * V.col(j).norm());
}
