#pragma once

// One block-pair task: shorten [G_p G_q] to a square triangular factor,
// orthogonalize that factor by the pointwise Jacobi method, and apply the
// accumulated transformation back to the long block-columns.
//
// Matrices are Eigen's default column-major MatrixXd throughout.

#include <cstdint>
#include <span>

#include <Eigen/Core>

#include "jhsvd/strategy.hpp"

namespace jhsvd {

using ColumnMatrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// J = diag(I_{n_plus}, -I_{n - n_plus}).  Column i (0-based, global) is
/// positive iff i < n_plus.
struct Signature {
  Index n_plus = 0;
  [[nodiscard]] bool positive(Index global_col) const noexcept { return global_col < n_plus; }
};

/// Lower triangle of G^T G.  Rows are streamed in chunks of 2 * cols and every
/// entry is a sequential chain of fused multiply-adds over the rows, so the
/// result does not depend on the chunk size.  The strict upper triangle is
/// left zero.
ColumnMatrix gram(const Eigen::Ref<const ColumnMatrix>& G);

/// Forward-looking (right-looking) column Cholesky H = L L^T reading only the
/// lower triangle of H.  On return H holds R = L^T with a zero strict lower
/// triangle.  Throws RankDeficiency with the failing pivot index.
void cholesky_in_place(Eigen::Ref<ColumnMatrix> H);

/// R factor of G (m x c, m a multiple of c): Householder QR of each c-row
/// chunk, merged into the running factor by c stages of Givens rotations, each
/// stage annihilating one (super)diagonal of the new chunk's factor.  The
/// diagonal of the result is nonnegative.
ColumnMatrix qr_peeloff(const Eigen::Ref<const ColumnMatrix>& G);

struct InnerOptions {
  int max_sweeps = 30;      // 1 gives the block-oriented variant
  double tolerance = 0.0;   // c(eps); 0 selects eps * sqrt(order)
  bool accumulate = true;   // form V_acc
};

struct BlockTaskResult {
  ColumnMatrix R_out;  // R V_acc
  ColumnMatrix V_acc;  // empty when not accumulated
  std::int64_t rotations = 0;
  std::int64_t proper_rotations = 0;
  int inner_sweeps = 0;
};

/// Pointwise one-sided Jacobi on the k x k factor R under the p-strategy of
/// order k.  colmap[i] is the global column behind local column i; a pair
/// whose columns fall on opposite sides of J.n_plus is rotated
/// hyperbolically, all other pairs trigonometrically with sorting.
BlockTaskResult inner_jacobi(const Eigen::Ref<const ColumnMatrix>& R, std::span<const Index> colmap,
                             Signature J, const PStrategy& strategy, const InnerOptions& opt = {});

/// A V with every entry accumulated by fused multiply-adds over the inner
/// dimension in ascending order.
void postmultiply(const Eigen::Ref<const ColumnMatrix>& A, const Eigen::Ref<const ColumnMatrix>& V,
                  Eigen::Ref<ColumnMatrix> out);
ColumnMatrix postmultiply(const Eigen::Ref<const ColumnMatrix>& A, const Eigen::Ref<const ColumnMatrix>& V);

}  // namespace jhsvd
