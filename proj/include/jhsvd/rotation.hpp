#pragma once

// Trigonometric and hyperbolic Jacobi rotations in the "fma, then scale by
// the cosine" form
//
//   trig:  [g_p' g_q'] = cs [g_p g_q] [ 1  tn ; -tn 1 ]
//   hyp:   [g_p' g_q'] = cs [g_p g_q] [ 1  tn ;  tn 1 ]
//
// computed from the 2x2 pivot Gram matrix by guarded Rutishauser-type
// formulas.

#include <cstdint>
#include <limits>
#include <vector>

#include "jhsvd/error.hpp"

namespace jhsvd {

enum class RotationKind { trig, hyperbolic };

/// Which cosine expression to use: cs1 = 1/sqrt(1 + t*tn^2),
/// cs2 = |ct| / sqrt(ct^2 + t).  Production code uses cs2.
enum class CosineFormula { cs1, cs2 };

struct PivotGram {
  double h_pp = 0.0;
  double h_qq = 0.0;
  double h_pq = 0.0;
};

struct RotationParams {
  RotationKind kind = RotationKind::trig;
  double cs = 1.0;
  double tn = 0.0;
  bool proper = false;  // cs != 1
  bool swap = false;    // followed by the column exchange P2
};

/// Raised when a hyperbolic pivot has |coth 2phi| < 1, which cannot happen
/// for a J-definite pair and means the input lost definiteness upstream.
class DomainError : public NumericError {
 public:
  using NumericError::NumericError;
};

namespace rotation_limits {
inline constexpr double eps = std::numeric_limits<double>::epsilon() / 2;  // 2^-53
inline constexpr double sqrt_eps = 0x1.6a09e667f3bcdp-27;                   // sqrt(2^-53)
inline constexpr double sqrt_2_over_eps = 0x1p27;                           // sqrt(2 / 2^-53)
}  // namespace rotation_limits

/// Parameters from a signed cot 2phi (coth 2phi).  The guards for tiny and
/// huge arguments and the 5/4 substitution are applied here.
RotationParams rotation_from_cot2(double ct2, RotationKind kind,
                                  CosineFormula formula = CosineFormula::cs2);

/// Rotation annihilating h_pq.  Requires h_pp, h_qq > 0 and h_pq != 0.
RotationParams compute_rotation(const PivotGram& g, RotationKind kind,
                                CosineFormula formula = CosineFormula::cs2);

/// |cos^2 + sin^2 - 1| (trig) or |(cosh - sinh)(cosh + sinh) - 1| (hyp),
/// with sin = cs * tn, evaluated in double-double arithmetic.
double departure(const RotationParams& r);

struct SurveyRow {
  int exponent = 0;
  double mean_cs1 = 0.0;
  double mean_cs2 = 0.0;
};

struct SurveyResult {
  std::vector<SurveyRow> rows;
  double mean_cs1 = 0.0;  // over all samples and exponents
  double mean_cs2 = 0.0;
};

/// For each exponent e in [e_min, e_max], draws `samples` values of
/// |ct 2phi| = (1 + m 2^-52) 2^e with uniform 52-bit m and averages the
/// departures of both cosine variants.
SurveyResult departure_survey(RotationKind kind, int e_min, int e_max, std::uint64_t samples,
                              std::uint64_t seed);

}  // namespace jhsvd
