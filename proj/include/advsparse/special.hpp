#pragma once

namespace advsparse::special {

/// Regularized incomplete beta function I_x(a, b) for x in [0, 1], a, b > 0.
///
/// Evaluated with the modified Lentz continued fraction, switching to
/// 1 - I_{1-x}(b, a) when x > (a + 1) / (a + b + 2) so the fraction converges
/// quickly. Absolute error is around 1e-14 for moderate parameters and stays
/// below 1e-12 for a up to a few thousand.
///
/// Throws DomainError for x outside [0, 1] or non-positive a, b.
double regularized_incomplete_beta(double x, double a, double b);

}  // namespace advsparse::special
