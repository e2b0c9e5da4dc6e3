#include "jhsvd/rotation.hpp"

#include <cmath>
#include <random>

#include "jhsvd/double_double.hpp"

namespace jhsvd {

RotationParams rotation_from_cot2(double ct2, RotationKind kind, CosineFormula formula) {
  using namespace rotation_limits;
  const bool hyp = kind == RotationKind::hyperbolic;
  const double t = hyp ? -1.0 : 1.0;
  double a = std::fabs(ct2);
  if (std::isnan(a)) throw NumericError("rotation: cot 2phi is NaN");

  if (hyp) {
    if (a == 1.0) a = 1.25;
    if (a < 1.0) throw DomainError("rotation: hyperbolic pivot with |coth 2phi| < 1");
  }

  double ct;  // |cot phi|
  if (a >= sqrt_2_over_eps) {
    ct = 2.0 * a;
  } else if (!hyp && a < sqrt_eps) {
    ct = a + 1.0;
  } else {
    ct = a + std::sqrt(std::fma(a, a, t));
  }

  RotationParams r;
  r.kind = kind;
  // sgn(0) = +1
  r.tn = (std::signbit(ct2) ? -1.0 : 1.0) / ct;
  if (ct >= sqrt_2_over_eps) {
    r.cs = 1.0;
  } else if (formula == CosineFormula::cs2) {
    r.cs = ct / std::sqrt(std::fma(ct, ct, t));
  } else {
    r.cs = 1.0 / std::sqrt(std::fma(t * r.tn, r.tn, 1.0));
  }
  r.proper = r.cs != 1.0;
  return r;
}

RotationParams compute_rotation(const PivotGram& g, RotationKind kind, CosineFormula formula) {
  if (!(g.h_pp > 0.0) || !(g.h_qq > 0.0)) throw InvalidArgument("compute_rotation: nonpositive column norm");
  if (g.h_pq == 0.0) throw InvalidArgument("compute_rotation: pivot pair is already orthogonal");
  const double t = kind == RotationKind::hyperbolic ? -1.0 : 1.0;
  const double h = g.h_qq - t * g.h_pp;
  const double ct2 = t * (h / (2.0 * g.h_pq));
  return rotation_from_cot2(ct2, kind, formula);
}

double departure(const RotationParams& r) {
  double sh, sl;
  eft::two_prod(r.cs, r.tn, sh, sl);
  const DoubleDouble s(sh, sl);
  const DoubleDouble c(r.cs);
  DoubleDouble d;
  if (r.kind == RotationKind::trig) {
    d = c * c + s * s - DoubleDouble(1.0);
  } else {
    d = (c - s) * (c + s) - DoubleDouble(1.0);
  }
  return std::fabs(d.to_double());
}

SurveyResult departure_survey(RotationKind kind, int e_min, int e_max, std::uint64_t samples,
                              std::uint64_t seed) {
  if (e_min > e_max) throw InvalidArgument("departure_survey: empty exponent range");
  if (samples == 0) throw InvalidArgument("departure_survey: need at least one sample");
  std::mt19937_64 rng(seed);
  SurveyResult out;
  double total1 = 0.0, total2 = 0.0;
  for (int e = e_min; e <= e_max; ++e) {
    double sum1 = 0.0, sum2 = 0.0;
    for (std::uint64_t i = 0; i < samples; ++i) {
      const std::uint64_t m = rng() >> 12;
      const double ct2 = std::ldexp(1.0 + std::ldexp(static_cast<double>(m), -52), e);
      sum1 += departure(rotation_from_cot2(ct2, kind, CosineFormula::cs1));
      sum2 += departure(rotation_from_cot2(ct2, kind, CosineFormula::cs2));
    }
    const auto ns = static_cast<double>(samples);
    out.rows.push_back({e, sum1 / ns, sum2 / ns});
    total1 += sum1 / ns;
    total2 += sum2 / ns;
  }
  const auto ne = static_cast<double>(out.rows.size());
  out.mean_cs1 = total1 / ne;
  out.mean_cs2 = total2 / ne;
  return out;
}

}  // namespace jhsvd
