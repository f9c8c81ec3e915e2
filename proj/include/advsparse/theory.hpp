#pragma once

#include <cstddef>
#include <cstdint>

#include "advsparse/geometry.hpp"

namespace advsparse::theory {

/// Dimension and cardinality of a uniformly random finite adversarial set.
/// k is a real so that cardinalities such as 2^99 stay representable.
struct TheoryQuery {
  std::size_t n = 3;
  double k = 1.0;
};

struct Bounds {
  double lower = 0.0;
  double upper = 0.0;
};

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Expected angular sparsity: integral over [0, pi] of (1 - g(alpha))^k where
/// g is the cap fraction. With the literal convention the integral is the
/// half-range form with the un-halved g, integral over [0, pi/2] of
/// (1 - t)^k + t^k.
double expected_sparsity_l2(const TheoryQuery& q,
                            geometry::CapConvention convention = geometry::CapConvention::kCorrected);

/// Expected pixel sparsity: sum over m = 0..n of (1 - 2^-m)^k.
double expected_sparsity_linf(const TheoryQuery& q);

/// (n - log2 k) / 4 and n - log2 k + e / (e - 1); they bracket the expected
/// pixel sparsity for 1 <= k <= 2^n.
Bounds linf_bounds(const TheoryQuery& q);

/// Monte-Carlo estimate of the minimal angle between a random direction and
/// k random unit perturbations. Trial t draws from its own derived stream.
MonteCarloEstimate mc_oracle_l2(const TheoryQuery& q, std::size_t trials, std::uint64_t seed,
                                std::size_t workers = 1);

/// Monte-Carlo estimate of the pixel sparsity of k random vertices.
MonteCarloEstimate mc_oracle_linf(const TheoryQuery& q, std::size_t trials, std::uint64_t seed,
                                  std::size_t workers = 1);

}  // namespace advsparse::theory
