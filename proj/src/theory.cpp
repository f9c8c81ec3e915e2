#include "advsparse/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "advsparse/errors.hpp"
#include "advsparse/parallel.hpp"
#include "quadrature.hpp"

namespace advsparse::theory {

namespace {

using geometry::Angle;
using geometry::CapConvention;
using geometry::kPi;

void validate(const TheoryQuery& q, std::size_t min_n) {
  if (q.n < min_n) throw InvalidDimension("theory query needs n >= " + std::to_string(min_n));
  if (!(q.k >= 1.0) || !std::isfinite(q.k)) throw DomainError("theory query needs k >= 1");
}

// (1 - g)^k without underflow for huge k.
double survival_power(double g, double k) {
  if (g >= 1.0) return 0.0;
  if (g <= 0.0) return 1.0;
  return std::exp(k * std::log1p(-g));
}

std::size_t integral_k(const TheoryQuery& q) {
  if (q.k > 1e9 || std::floor(q.k) != q.k) {
    throw DomainError("Monte-Carlo oracle needs an integral k <= 1e9");
  }
  return static_cast<std::size_t>(q.k);
}

MonteCarloEstimate summarize(const std::vector<double>& samples) {
  const double count = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / count;
  double sq = 0.0;
  for (double s : samples) sq += (s - mean) * (s - mean);
  const double variance = samples.size() > 1 ? sq / (count - 1.0) : 0.0;
  return {mean, std::sqrt(variance / count)};
}

}  // namespace

double expected_sparsity_l2(const TheoryQuery& q, CapConvention convention) {
  validate(q, 3);
  if (convention == CapConvention::kCorrected) {
    auto integrand = [&](double alpha) {
      return survival_power(geometry::cap_fraction(q.n, Angle(std::clamp(alpha, 0.0, kPi))), q.k);
    };
    return std::clamp(detail::integrate_graded(integrand, 0.0, kPi), 0.0, kPi);
  }
  auto integrand = [&](double alpha) {
    const double t = geometry::cap_fraction(q.n, Angle(std::clamp(alpha, 0.0, kPi / 2)), CapConvention::kLiteral);
    return survival_power(t, q.k) + std::pow(t, q.k);
  };
  return detail::integrate_graded(integrand, 0.0, kPi / 2);
}

double expected_sparsity_linf(const TheoryQuery& q) {
  validate(q, 1);
  // m = 0 contributes (1 - 1)^k = 0.
  double total = 0.0;
  for (std::size_t m = 1; m <= q.n; ++m) {
    total += std::exp(q.k * std::log1p(-std::ldexp(1.0, -static_cast<int>(m))));
  }
  return total;
}

Bounds linf_bounds(const TheoryQuery& q) {
  validate(q, 1);
  const double center = static_cast<double>(q.n) - std::log2(q.k);
  const double e = std::exp(1.0);
  return {center / 4.0, center + e / (e - 1.0)};
}

MonteCarloEstimate mc_oracle_l2(const TheoryQuery& q, std::size_t trials, std::uint64_t seed, std::size_t workers) {
  validate(q, 2);
  if (trials < 1) throw DomainError("Monte-Carlo oracle needs at least one trial");
  const std::size_t k = integral_k(q);
  std::vector<double> samples(trials);
  parallel_for(trials, workers, [&](std::size_t t) {
    Rng rng = make_rng(seed, Stream::kMonteCarlo, t);
    const auto u = geometry::sample_uniform_sphere(q.n, rng);
    double best_dot = -std::numeric_limits<double>::infinity();
    Vector best;
    for (std::size_t j = 0; j < k; ++j) {
      auto delta = geometry::sample_uniform_sphere(q.n, rng);
      const double dot = delta.coords().dot(u.coords());
      if (dot > best_dot) {
        best_dot = dot;
        best = delta.coords();
      }
    }
    samples[t] = geometry::angle_between(u, geometry::UnitVector::normalized(best)).radians();
  });
  return summarize(samples);
}

MonteCarloEstimate mc_oracle_linf(const TheoryQuery& q, std::size_t trials, std::uint64_t seed,
                                  std::size_t workers) {
  validate(q, 1);
  if (trials < 1) throw DomainError("Monte-Carlo oracle needs at least one trial");
  const std::size_t k = integral_k(q);
  std::vector<double> samples(trials);
  parallel_for(trials, workers, [&](std::size_t t) {
    Rng rng = make_rng(seed, Stream::kMonteCarlo, t);
    auto [u, sigma] = geometry::sample_vertex_and_permutation(q.n, rng);
    std::uniform_int_distribution<int> coin(0, 1);
    std::vector<int> delta(q.n);
    std::size_t best = q.n;
    for (std::size_t j = 0; j < k; ++j) {
      for (auto& s : delta) s = coin(rng) == 0 ? -1 : 1;
      // Largest 1-based rank at which delta differs from u, 0 when equal.
      std::size_t rank = q.n;
      while (rank > 0 && delta[sigma[rank - 1]] == u.signs()[sigma[rank - 1]]) --rank;
      best = std::min(best, rank);
    }
    samples[t] = static_cast<double>(best);
  });
  return summarize(samples);
}

}  // namespace advsparse::theory
