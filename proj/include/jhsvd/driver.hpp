#pragma once

// Two-level blocked one-sided Jacobi (H)SVD of a square full-rank factor G.
//
// G is split into b = n / w block-columns of width w.  Each block sweep runs
// the b - 1 p-steps of the outer strategy; a p-step processes its b / 2
// disjoint block pairs independently (shorten, inner Jacobi, postmultiply).
// The iteration stops after a block sweep without proper rotations.

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "jhsvd/block_kernel.hpp"
#include "jhsvd/parallel.hpp"
#include "jhsvd/strategy.hpp"

namespace jhsvd {

enum class Variant {
  full_block,      // inner Jacobi iterated to convergence (up to 30 sweeps)
  block_oriented,  // exactly one inner sweep per block task
};

enum class Shortening { cholesky, qr };

struct SolverConfig {
  int block_width = 16;  // w; the inner factor has order 2w
  Variant variant = Variant::full_block;
  int max_block_sweeps = 30;
  StrategyKind outer_strategy = StrategyKind::reversed_row;
  StrategyKind inner_strategy = StrategyKind::reversed_row;
  bool accumulate_v = true;
  /// Recover V from G_in V = U Sigma instead of accumulating it; keeps a
  /// copy of the input.
  bool solve_for_v = false;
  Shortening shortening = Shortening::cholesky;
  /// Worker threads for the block tasks of a p-step.  Results are bitwise
  /// independent of this value.
  int workers = 1;

  [[nodiscard]] int inner_max_sweeps() const noexcept { return variant == Variant::full_block ? 30 : 1; }
};

struct SweepStats {
  std::int64_t rotations = 0;
  std::int64_t proper_rotations = 0;
};

struct HsvdResult {
  Eigen::VectorXd sigma;           // non-increasing within each sign class
  ColumnMatrix U;                  // m x n, G V = U diag(sigma)
  std::optional<ColumnMatrix> V;   // J-orthogonal
  Signature J;                     // positives first
  std::vector<SweepStats> stats;   // one entry per block sweep
  int block_sweeps = 0;
  bool converged = false;
  /// Column i of the result came from working column permutation[i] before
  /// the final sort.
  std::vector<Index> permutation;
};

/// Runs block sweeps on G (and V, when given) in place.  colmap[i] is the
/// global column behind column i; J refers to global columns.  Stops after
/// a sweep with no proper rotation, after max_sweeps, or once *stop is set
/// (checked between sweeps).
struct SweepOutcome {
  std::vector<SweepStats> stats;
  bool converged = false;
};

SweepOutcome run_block_sweeps(Eigen::Ref<ColumnMatrix> G, ColumnMatrix* V, std::span<const Index> colmap,
                              Signature J, const SolverConfig& cfg, int max_sweeps, WorkerPool& pool,
                              const std::atomic<bool>* stop = nullptr);

/// Square triangular R with R^T R = A^T A.  Rank loss is reported against
/// the global column colmap[i].
ColumnMatrix shorten(const Eigen::Ref<const ColumnMatrix>& A, Shortening how, std::span<const Index> colmap);

/// Throws NumericError unless every column norm of G lies in
/// [mu_tilde, sqrt(nu_hat)], the range in which the Gram matrices and the
/// rotation formulas can neither overflow nor lose accuracy to underflow.
void check_column_scaling(const Eigen::Ref<const ColumnMatrix>& G);

HsvdResult block_jacobi(const Eigen::Ref<const ColumnMatrix>& G, Signature J, const SolverConfig& cfg = {});

/// Solves R V = W for upper-triangular R by back substitution.
ColumnMatrix solve_for_V(const Eigen::Ref<const ColumnMatrix>& R, const Eigen::Ref<const ColumnMatrix>& W);

/// sigma_i = ||g_i||_2 by the overflow-free norm.  Throws RankDeficiency on
/// a zero column.
Eigen::VectorXd extract_sigma(const Eigen::Ref<const ColumnMatrix>& G);

/// Sorts sigma non-increasingly inside each sign class (positives first)
/// and permutes the columns of U and V alike.  Ties keep their order.
void sort_by_signature(HsvdResult& r);

}  // namespace jhsvd
