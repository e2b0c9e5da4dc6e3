#pragma once

// Test factors with prescribed spectra.  A factor G with signature J is
// built so that G J G^T has eigenvalues lambda and the hyperbolic singular
// values of G are sqrt|lambda|.

#include <cstdint>

#include <Eigen/Core>

#include "jhsvd/block_kernel.hpp"

namespace jhsvd {

/// Spectrum families (k = max(n / 1024, 1)):
///   1: lambda(1:16) = 0.5, the rest normal(0, 0.1) without zeros
///   2: 1 + a type 1 draw, checked to be positive
///   3: +-uniform(1e-7, 10 k) with independent fair signs
///   4: uniform(1e-7, 10 k)
struct SpectrumSpec {
  int type = 2;
  Index n = 0;
  std::uint64_t seed = 0;
};

Eigen::VectorXd gen_spectrum(const SpectrumSpec& spec);

struct TestFactor {
  ColumnMatrix G;
  Signature J;
  Eigen::VectorXd lambda;  // sorted: positives by decreasing value, then negatives by decreasing |value|
  ColumnMatrix V;          // J Z^T J = Z^-1, so G V = Q diag(sqrt|lambda|) up to rounding
};

/// G = Q diag(sqrt|lambda|) Z with Q a product of n random Householder
/// reflectors and Z a random J-orthogonal matrix of modest condition
/// (orthogonal when J = I).  Deterministic in (lambda, seed).
TestFactor gen_factor(const Eigen::VectorXd& lambda, std::uint64_t seed);

/// The harness fixture of a spectrum type and order: spectrum seed
/// base + 1000 type + n, factor seed base + 7 + n + type.
TestFactor make_fixture(int type, Index n, std::uint64_t base_seed = 0);

/// max_i |sigma_i^2 j_i - lambda_i| / |lambda_i| after ordering both sides
/// like TestFactor::lambda.
double relative_error(const Eigen::VectorXd& sigma, Signature J, const Eigen::VectorXd& lambda);

/// Orders values as TestFactor::lambda does and returns the count of
/// positive entries.
Index sort_spectrum(Eigen::VectorXd& values);

}  // namespace jhsvd
