#include "advsparse/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "advsparse/errors.hpp"
#include "advsparse/special.hpp"

namespace advsparse::geometry {

namespace {

constexpr double kUnitTolerance = 1e-9;
constexpr double kParallelTolerance = 1e-12;

void require_same_dim(std::size_t a, std::size_t b) {
  if (a != b) {
    throw InvalidDimension("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

// 2 * atan2(|a - b|, |a + b|) for unit a, b; accurate near 0 and pi unlike acos.
double unit_angle(const Vector& a, const Vector& b) {
  return 2.0 * std::atan2((a - b).norm(), (a + b).norm());
}

}  // namespace

UnitVector::UnitVector(Vector coords) : coords_(std::move(coords)) {
  if (coords_.size() < 2) throw InvalidDimension("unit vectors need dimension >= 2");
  if (!coords_.allFinite() || std::fabs(coords_.norm() - 1.0) > kUnitTolerance) {
    throw DomainError("vector is not of unit norm");
  }
}

UnitVector UnitVector::normalized(const Vector& v) {
  if (v.size() < 2) throw InvalidDimension("unit vectors need dimension >= 2");
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw DegenerateInput("cannot normalize a zero or non-finite vector");
  return UnitVector(Vector(v / norm), Unchecked{});
}

VertexSigns::VertexSigns(std::vector<int> signs) : signs_(std::move(signs)) {
  if (signs_.empty()) throw InvalidDimension("vertex needs dimension >= 1");
  for (int s : signs_) {
    if (s != 1 && s != -1) throw DomainError("vertex entries must be +1 or -1");
  }
}

Vector VertexSigns::as_vector() const {
  Vector v(static_cast<Eigen::Index>(signs_.size()));
  for (std::size_t i = 0; i < signs_.size(); ++i) v[static_cast<Eigen::Index>(i)] = signs_[i];
  return v;
}

PixelPermutation::PixelPermutation(std::vector<std::size_t> order) : order_(std::move(order)) {
  if (order_.empty()) throw InvalidDimension("permutation needs dimension >= 1");
  std::vector<bool> seen(order_.size(), false);
  for (std::size_t idx : order_) {
    if (idx >= order_.size() || seen[idx]) throw DomainError("order is not a permutation");
    seen[idx] = true;
  }
}

Angle::Angle(double radians) : radians_(radians) {
  if (!(radians >= 0.0 && radians <= kPi)) {
    throw DomainError("angle must lie in [0, pi], got " + std::to_string(radians));
  }
}

UnitVector sample_uniform_sphere(std::size_t n, Rng& rng) {
  if (n < 2) throw InvalidDimension("sphere sampling needs n >= 2");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(n));
  double norm = 0.0;
  // A zero draw has probability zero; resample instead of dividing by it.
  while (!(norm > 0.0)) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = gauss(rng);
    norm = v.norm();
  }
  return UnitVector::normalized(v);
}

std::pair<VertexSigns, PixelPermutation> sample_vertex_and_permutation(std::size_t n, Rng& rng) {
  if (n < 1) throw InvalidDimension("vertex sampling needs n >= 1");
  std::uniform_int_distribution<int> coin(0, 1);
  std::vector<int> signs(n);
  for (auto& s : signs) s = coin(rng) == 0 ? -1 : 1;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  return {VertexSigns(std::move(signs)), PixelPermutation(std::move(order))};
}

double cap_fraction(std::size_t n, Angle alpha, CapConvention convention) {
  if (n < 3) throw InvalidDimension("cap fraction needs n >= 3");
  const double a = alpha.radians();
  if (a > kPi / 2) return 1.0 - cap_fraction(n, Angle(kPi - a), convention);
  const double s = std::sin(a);
  const double ib = special::regularized_incomplete_beta(s * s, 0.5 * static_cast<double>(n - 1), 0.5);
  return convention == CapConvention::kCorrected ? 0.5 * ib : ib;
}

Angle angle_between(const UnitVector& a, const UnitVector& b) {
  require_same_dim(a.dim(), b.dim());
  return Angle(std::clamp(unit_angle(a.coords(), b.coords()), 0.0, kPi));
}

Angle angle_between(const Vector& a, const Vector& b) {
  require_same_dim(static_cast<std::size_t>(a.size()), static_cast<std::size_t>(b.size()));
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateInput("angle with a zero vector is undefined");
  return Angle(std::clamp(unit_angle(a / na, b / nb), 0.0, kPi));
}

Vector project_to_cap(const Vector& delta, const UnitVector& u, Angle alpha, double eps) {
  require_same_dim(static_cast<std::size_t>(delta.size()), u.dim());
  if (!(eps > 0.0)) throw DomainError("projection radius must be positive");
  const double length = delta.norm();
  if (!(length > 0.0)) throw DegenerateInput("cannot project the zero perturbation onto a cap");
  if (!std::isfinite(length)) throw NumericError("non-finite perturbation");

  const double target = std::min(eps, length);
  const Vector& axis = u.coords();
  const double along = delta.dot(axis);
  Vector ortho = delta - along * axis;
  double ortho_norm = ortho.norm();
  const double theta = std::atan2(ortho_norm, along);
  const double a = alpha.radians();

  if (theta <= a) return delta * (target / length);

  if (ortho_norm < kParallelTolerance * length) {
    // delta is antipodal to u: every boundary point is equally close.
    Eigen::Index pick = 0;
    while (pick < axis.size() && std::fabs(axis[pick]) > 1.0 - kParallelTolerance) ++pick;
    ortho = -axis[pick] * axis;
    ortho[pick] += 1.0;
    ortho_norm = ortho.norm();
  }
  Vector boundary = std::cos(a) * axis + std::sin(a) * (ortho / ortho_norm);
  return boundary * (target / boundary.norm());
}

}  // namespace advsparse::geometry
