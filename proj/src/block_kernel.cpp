#include "jhsvd/block_kernel.hpp"

#include <array>
#include <cmath>
#include <string>
#include <utility>

#include "jhsvd/error.hpp"
#include "jhsvd/robust_norm.hpp"
#include "jhsvd/rotation.hpp"

namespace jhsvd {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double hypot2(double a, double b) {
  const std::array<double, 2> v{a, b};
  return norm2(std::span<const double>(v)).to_double();
}

// Householder QR of a square chunk, in place; the reflectors are discarded.
void householder_chunk(Eigen::Ref<ColumnMatrix> A) {
  const Index c = A.cols();
  Eigen::VectorXd v(c);
  for (Index k = 0; k + 1 < c; ++k) {
    const Index len = c - k - 1;
    const double alpha = A(k, k);
    const double xnorm = norm2(std::span<const double>(&A(k + 1, k), static_cast<std::size_t>(len))).to_double();
    if (xnorm == 0.0) continue;
    const double beta = -std::copysign(hypot2(alpha, xnorm), alpha);
    const double tau = (beta - alpha) / beta;
    const double scale = 1.0 / (alpha - beta);
    for (Index i = 0; i < len; ++i) v[i] = A(k + 1 + i, k) * scale;
    A(k, k) = beta;
    A.col(k).tail(len).setZero();
    for (Index l = k + 1; l < c; ++l) {
      double* a = &A(k, l);
      double z = a[0];
      for (Index i = 0; i < len; ++i) z = std::fma(v[i], a[i + 1], z);
      const double f = -tau * z;
      a[0] += f;
      for (Index i = 0; i < len; ++i) a[i + 1] = std::fma(f, v[i], a[i + 1]);
    }
  }
}

// Merges the triangular R1 into R0; R1 is destroyed.
void peel_off(ColumnMatrix& R0, ColumnMatrix& R1) {
  const Index c = R0.cols();
  for (Index k = 0; k < c; ++k) {
    for (Index x = k; x < c; ++x) {
      const Index y = x - k;
      const double b = R1(y, x);
      if (b == 0.0) continue;
      const double a = R0(x, x);
      const double r = hypot2(a, b);
      const double cs = a / r, sn = b / r;
      R0(x, x) = r;
      R1(y, x) = 0.0;
      for (Index j = x + 1; j < c; ++j) {
        const double u = R0(x, j), w = R1(y, j);
        R0(x, j) = std::fma(cs, u, sn * w);
        R1(y, j) = std::fma(cs, w, -sn * u);
      }
    }
  }
}

void check_finite(const Eigen::Ref<const ColumnMatrix>& M, const char* who) {
  if (!M.allFinite()) throw InvalidArgument(std::string(who) + ": non-finite entry");
}

}  // namespace

ColumnMatrix gram(const Eigen::Ref<const ColumnMatrix>& G) {
  const Index m = G.rows(), c = G.cols();
  if (c == 0 || m < c) throw InvalidArgument("gram: need rows >= cols > 0");
  ColumnMatrix H = ColumnMatrix::Zero(c, c);
  const Index chunk = 2 * c;
  RowMajor T(chunk, c);
  for (Index r0 = 0; r0 < m; r0 += chunk) {
    const Index rows = std::min(chunk, m - r0);
    T.topRows(rows) = G.middleRows(r0, rows);
    for (Index r = 0; r < rows; ++r) {
      const double* g = T.row(r).data();
      for (Index j = 0; j < c; ++j) {
        const double gj = g[j];
        double* h = H.col(j).data();
        for (Index i = j; i < c; ++i) h[i] = std::fma(g[i], gj, h[i]);
      }
    }
  }
  return H;
}

void cholesky_in_place(Eigen::Ref<ColumnMatrix> H) {
  const Index n = H.rows();
  if (H.cols() != n) throw InvalidArgument("cholesky_in_place: matrix not square");
  for (Index k = 0; k < n; ++k) {
    const double d = H(k, k);
    if (!(d > 0.0) || !std::isfinite(d))
      throw RankDeficiency("cholesky: nonpositive pivot " + std::to_string(k), static_cast<long>(k));
    const double s = std::sqrt(d);
    H(k, k) = s;
    for (Index x = k + 1; x < n; ++x) H(x, k) /= s;
    for (Index j = k + 1; j < n; ++j) {
      const double ljk = H(j, k);
      for (Index x = j; x < n; ++x) H(x, j) = std::fma(-H(x, k), ljk, H(x, j));
    }
  }
  for (Index j = 0; j < n; ++j)
    for (Index x = j + 1; x < n; ++x) {
      H(j, x) = H(x, j);
      H(x, j) = 0.0;
    }
}

ColumnMatrix qr_peeloff(const Eigen::Ref<const ColumnMatrix>& G) {
  const Index m = G.rows(), c = G.cols();
  if (c == 0 || m < c || m % c != 0) throw InvalidArgument("qr_peeloff: rows must be a positive multiple of cols");
  check_finite(G, "qr_peeloff");
  ColumnMatrix R0 = G.topRows(c);
  householder_chunk(R0);
  ColumnMatrix R1(c, c);
  for (Index r0 = c; r0 < m; r0 += c) {
    R1 = G.middleRows(r0, c);
    householder_chunk(R1);
    peel_off(R0, R1);
  }
  R0.triangularView<Eigen::StrictlyLower>().setZero();
  for (Index x = 0; x < c; ++x)
    if (std::signbit(R0(x, x))) R0.row(x) = -R0.row(x);
  return R0;
}

BlockTaskResult inner_jacobi(const Eigen::Ref<const ColumnMatrix>& R, std::span<const Index> colmap,
                             Signature J, const PStrategy& strategy, const InnerOptions& opt) {
  const Index k = R.cols();
  if (R.rows() != k) throw InvalidArgument("inner_jacobi: factor not square");
  if (static_cast<Index>(colmap.size()) != k) throw InvalidArgument("inner_jacobi: column map size mismatch");
  if (strategy.n != k) throw InvalidArgument("inner_jacobi: strategy order differs from factor order");
  if (opt.max_sweeps < 1) throw InvalidArgument("inner_jacobi: max_sweeps must be >= 1");

  BlockTaskResult res;
  res.R_out = R;
  if (opt.accumulate) res.V_acc = ColumnMatrix::Identity(k, k);
  const double tol = opt.tolerance > 0.0 ? opt.tolerance : rotation_limits::eps * std::sqrt(static_cast<double>(k));
  const std::size_t len = static_cast<std::size_t>(k);

  auto rotate = [&](double* x, double* y, const RotationParams& r, std::size_t n) {
    if (r.kind == RotationKind::trig) {
      for (std::size_t i = 0; i < n; ++i) {
        const double a = x[i], b = y[i];
        x[i] = std::fma(-r.tn, b, a);
        y[i] = std::fma(r.tn, a, b);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const double a = x[i], b = y[i];
        x[i] = std::fma(r.tn, b, a);
        y[i] = std::fma(r.tn, a, b);
      }
    }
    if (r.cs != 1.0)
      for (std::size_t i = 0; i < n; ++i) {
        x[i] *= r.cs;
        y[i] *= r.cs;
      }
  };

  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    std::int64_t a_r = 0, b_r = 0;
    for (const PStep& step : strategy.steps) {
      for (const PivotPair& pq : step) {
        const Index p = pq.p - 1, q = pq.q - 1;
        double* gp = res.R_out.col(p).data();
        double* gq = res.R_out.col(q).data();
        double hpp = 0.0, hqq = 0.0, hpq = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
          hpp = std::fma(gp[i], gp[i], hpp);
          hqq = std::fma(gq[i], gq[i], hqq);
          hpq = std::fma(gp[i], gq[i], hpq);
        }
        if (hpp == 0.0) throw RankDeficiency("inner_jacobi: zero column", static_cast<long>(colmap[p]));
        if (hqq == 0.0) throw RankDeficiency("inner_jacobi: zero column", static_cast<long>(colmap[q]));

        const bool pos_p = J.positive(colmap[p]), pos_q = J.positive(colmap[q]);
        const RotationKind kind = pos_p == pos_q ? RotationKind::trig : RotationKind::hyperbolic;
        const bool rho = !(std::fabs(hpq) < tol * std::sqrt(hpp) * std::sqrt(hqq));
        double hpp_new = hpp, hqq_new = hqq;
        if (rho) {
          ++a_r;
          const RotationParams r = compute_rotation({hpp, hqq, hpq}, kind);
          if (r.proper) ++b_r;
          rotate(gp, gq, r, len);
          if (opt.accumulate) rotate(res.V_acc.col(p).data(), res.V_acc.col(q).data(), r, len);
          if (kind == RotationKind::trig) {
            hpp_new = std::fma(-r.tn, hpq, hpp);
            hqq_new = std::fma(r.tn, hpq, hqq);
          }
        }
        if (kind == RotationKind::trig) {
          const bool swap = pos_p ? hpp_new < hqq_new : hpp_new > hqq_new;
          if (swap) {
            res.R_out.col(p).swap(res.R_out.col(q));
            if (opt.accumulate) res.V_acc.col(p).swap(res.V_acc.col(q));
          }
        }
      }
    }
    res.rotations += a_r;
    res.proper_rotations += b_r;
    res.inner_sweeps = sweep;
    if (a_r == 0) break;
  }
  return res;
}

void postmultiply(const Eigen::Ref<const ColumnMatrix>& A, const Eigen::Ref<const ColumnMatrix>& V,
                  Eigen::Ref<ColumnMatrix> out) {
  const Index m = A.rows(), k = A.cols();
  if (V.rows() != k || V.cols() != k || out.rows() != m || out.cols() != k)
    throw InvalidArgument("postmultiply: dimension mismatch");
  for (Index j = 0; j < k; ++j) {
    double* o = out.col(j).data();
    for (Index i = 0; i < m; ++i) o[i] = 0.0;
    for (Index l = 0; l < k; ++l) {
      const double v = V(l, j);
      const double* a = A.col(l).data();
      for (Index i = 0; i < m; ++i) o[i] = std::fma(a[i], v, o[i]);
    }
  }
}

ColumnMatrix postmultiply(const Eigen::Ref<const ColumnMatrix>& A, const Eigen::Ref<const ColumnMatrix>& V) {
  ColumnMatrix out(A.rows(), V.cols());
  postmultiply(A, V, out);
  return out;
}

}  // namespace jhsvd
