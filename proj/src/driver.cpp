#include "jhsvd/driver.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>

#include <Eigen/QR>

#include "jhsvd/error.hpp"
#include "jhsvd/robust_norm.hpp"

namespace jhsvd {

namespace {

// Strategies are pure functions of (kind, n); the closest ones cost a search.
const PStrategy& cached_strategy(StrategyKind kind, int n) {
  static std::mutex mu;
  static std::map<std::pair<StrategyKind, int>, std::unique_ptr<PStrategy>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[{kind, n}];
  if (!slot) slot = std::make_unique<PStrategy>(make_pstrategy(kind, n));
  return *slot;
}

struct TaskOutcome {
  std::int64_t rotations = 0;
  std::int64_t proper = 0;
};

bool is_upper_triangular(const Eigen::Ref<const ColumnMatrix>& A) {
  for (Index j = 0; j < A.cols(); ++j)
    for (Index i = j + 1; i < A.rows(); ++i)
      if (A(i, j) != 0.0) return false;
  return true;
}

}  // namespace

ColumnMatrix shorten(const Eigen::Ref<const ColumnMatrix>& A, Shortening how, std::span<const Index> colmap) {
  try {
    if (how == Shortening::qr) return qr_peeloff(A);
    ColumnMatrix R = gram(A);
    cholesky_in_place(R);
    return R;
  } catch (const RankDeficiency& e) {
    const Index g = colmap[static_cast<std::size_t>(e.index())];
    throw RankDeficiency("numerical rank loss at global column " + std::to_string(g), static_cast<long>(g));
  }
}

void check_column_scaling(const Eigen::Ref<const ColumnMatrix>& G) {
  const SafeBounds b = safe_bounds(static_cast<std::size_t>(G.rows()));
  const double hi = std::sqrt(b.nu_hat);
  for (Index j = 0; j < G.cols(); ++j) {
    const double s = norm2(G.col(j)).to_double();
    if (!(s >= b.mu_tilde) || !(s <= hi))
      throw NumericError("column " + std::to_string(j) + " has norm " + std::to_string(s) +
                         " outside the safe range; rescale the input factor");
  }
}

SweepOutcome run_block_sweeps(Eigen::Ref<ColumnMatrix> G, ColumnMatrix* V, std::span<const Index> colmap,
                              Signature J, const SolverConfig& cfg, int max_sweeps, WorkerPool& pool,
                              const std::atomic<bool>* stop) {
  const Index m = G.rows(), n = G.cols();
  const Index w = cfg.block_width;
  if (w < 1 || n % (2 * w) != 0)
    throw InvalidArgument("order " + std::to_string(n) + " is not a multiple of twice the block width " +
                          std::to_string(w));
  if (m < 2 * w) throw InvalidArgument("fewer rows than an inner factor needs");
  if (static_cast<Index>(colmap.size()) != n) throw InvalidArgument("column map size mismatch");
  if (V && V->cols() != n) throw InvalidArgument("V has the wrong number of columns");
  const int b = static_cast<int>(n / w);
  const PStrategy& outer = cached_strategy(cfg.outer_strategy, b);
  const PStrategy& inner = cached_strategy(cfg.inner_strategy, static_cast<int>(2 * w));
  const InnerOptions iopt{.max_sweeps = cfg.inner_max_sweeps(), .tolerance = 0.0, .accumulate = true};
  const Index k = 2 * w;

  SweepOutcome out;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (sweep > 0 && stop && stop->load(std::memory_order_acquire)) break;
    SweepStats total;
    for (const PStep& step : outer.steps) {
      std::vector<TaskOutcome> results(step.size());
      pool.run(static_cast<std::int64_t>(step.size()), [&](std::int64_t t) {
        const PivotPair blk = step[static_cast<std::size_t>(t)];
        const Index cp = (blk.p - 1) * w, cq = (blk.q - 1) * w;
        ColumnMatrix A(m, k);
        A.leftCols(w) = G.middleCols(cp, w);
        A.rightCols(w) = G.middleCols(cq, w);
        std::vector<Index> local(static_cast<std::size_t>(k));
        for (Index i = 0; i < w; ++i) {
          local[static_cast<std::size_t>(i)] = colmap[static_cast<std::size_t>(cp + i)];
          local[static_cast<std::size_t>(w + i)] = colmap[static_cast<std::size_t>(cq + i)];
        }
        const ColumnMatrix R = shorten(A, cfg.shortening, local);
        const BlockTaskResult r = inner_jacobi(R, local, J, inner, iopt);
        results[static_cast<std::size_t>(t)] = {r.rotations, r.proper_rotations};
        if (r.rotations == 0) return;
        const ColumnMatrix Gn = postmultiply(A, r.V_acc);
        G.middleCols(cp, w) = Gn.leftCols(w);
        G.middleCols(cq, w) = Gn.rightCols(w);
        if (V) {
          ColumnMatrix B(V->rows(), k);
          B.leftCols(w) = V->middleCols(cp, w);
          B.rightCols(w) = V->middleCols(cq, w);
          const ColumnMatrix Vn = postmultiply(B, r.V_acc);
          V->middleCols(cp, w) = Vn.leftCols(w);
          V->middleCols(cq, w) = Vn.rightCols(w);
        }
      });
      for (const TaskOutcome& r : results) {
        total.rotations += r.rotations;
        total.proper_rotations += r.proper;
      }
    }
    out.stats.push_back(total);
    if (total.proper_rotations == 0) {
      out.converged = true;
      break;
    }
  }
  return out;
}

ColumnMatrix solve_for_V(const Eigen::Ref<const ColumnMatrix>& R, const Eigen::Ref<const ColumnMatrix>& W) {
  const Index n = R.rows();
  if (R.cols() != n || W.rows() != n) throw InvalidArgument("solve_for_V: dimension mismatch");
  for (Index i = 0; i < n; ++i)
    if (R(i, i) == 0.0) throw RankDeficiency("solve_for_V: zero diagonal entry " + std::to_string(i), static_cast<long>(i));
  ColumnMatrix V = W;
  for (Index c = 0; c < V.cols(); ++c) {
    double* v = V.col(c).data();
    for (Index i = n - 1; i >= 0; --i) {
      double s = v[i];
      for (Index j = i + 1; j < n; ++j) s = std::fma(-R(i, j), v[j], s);
      v[i] = s / R(i, i);
    }
  }
  return V;
}

Eigen::VectorXd extract_sigma(const Eigen::Ref<const ColumnMatrix>& G) {
  Eigen::VectorXd s(G.cols());
  for (Index j = 0; j < G.cols(); ++j) {
    s[j] = norm2(G.col(j)).to_double();
    if (s[j] == 0.0) throw RankDeficiency("zero column " + std::to_string(j), static_cast<long>(j));
  }
  return s;
}

void sort_by_signature(HsvdResult& r) {
  const Index n = r.sigma.size();
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  auto by_sigma = [&](Index a, Index b) { return r.sigma[a] > r.sigma[b]; };
  const auto mid = perm.begin() + r.J.n_plus;
  std::stable_sort(perm.begin(), mid, by_sigma);
  std::stable_sort(mid, perm.end(), by_sigma);

  Eigen::VectorXd s(n);
  ColumnMatrix U(r.U.rows(), n);
  for (Index i = 0; i < n; ++i) {
    s[i] = r.sigma[perm[static_cast<std::size_t>(i)]];
    U.col(i) = r.U.col(perm[static_cast<std::size_t>(i)]);
  }
  r.sigma = std::move(s);
  r.U = std::move(U);
  if (r.V) {
    ColumnMatrix V(r.V->rows(), n);
    for (Index i = 0; i < n; ++i) V.col(i) = r.V->col(perm[static_cast<std::size_t>(i)]);
    r.V = std::move(V);
  }
  if (r.permutation.empty()) {
    r.permutation = perm;
  } else {
    std::vector<Index> composed(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) composed[i] = r.permutation[static_cast<std::size_t>(perm[i])];
    r.permutation = std::move(composed);
  }
}

HsvdResult block_jacobi(const Eigen::Ref<const ColumnMatrix>& G, Signature J, const SolverConfig& cfg) {
  const Index n = G.cols();
  if (G.rows() < n) throw InvalidArgument("block_jacobi: need rows >= cols");
  if (J.n_plus < 0 || J.n_plus > n) throw InvalidArgument("block_jacobi: n_plus out of range");
  if (!G.allFinite()) throw InvalidArgument("block_jacobi: non-finite input");
  if (cfg.max_block_sweeps < 1) throw InvalidArgument("block_jacobi: max_block_sweeps must be >= 1");
  check_column_scaling(G);

  ColumnMatrix W = G;
  std::optional<ColumnMatrix> V;
  if (cfg.accumulate_v && !cfg.solve_for_v) V = ColumnMatrix::Identity(n, n);
  std::vector<Index> colmap(static_cast<std::size_t>(n));
  std::iota(colmap.begin(), colmap.end(), Index{0});

  WorkerPool pool(cfg.workers);
  const SweepOutcome o = run_block_sweeps(W, V ? &*V : nullptr, colmap, J, cfg, cfg.max_block_sweeps, pool);

  HsvdResult r;
  r.J = J;
  r.stats = o.stats;
  r.block_sweeps = static_cast<int>(o.stats.size());
  r.converged = o.converged;
  r.sigma = extract_sigma(W);
  if (cfg.solve_for_v) {
    // G V = W: back substitution for triangular input, otherwise through a QR
    // factorization of the preserved input.
    V = is_upper_triangular(G) && G.rows() == n ? solve_for_V(G, W)
                                                : ColumnMatrix(ColumnMatrix(G).householderQr().solve(W));
  }
  r.U = W * r.sigma.cwiseInverse().asDiagonal();
  r.V = std::move(V);
  sort_by_signature(r);
  return r;
}

}  // namespace jhsvd
