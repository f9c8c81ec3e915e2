#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "advsparse/rng.hpp"

namespace advsparse {

using Vector = Eigen::VectorXd;

namespace geometry {

inline constexpr double kPi = 3.14159265358979323846;

/// Point on the unit L2 sphere of dimension >= 2.
class UnitVector {
 public:
  /// Validates an already-normalized vector (norm within 1e-9 of one).
  explicit UnitVector(Vector coords);

  /// Rescales a non-zero vector onto the sphere.
  static UnitVector normalized(const Vector& v);

  const Vector& coords() const noexcept { return coords_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(coords_.size()); }
  UnitVector operator-() const { return UnitVector(Vector(-coords_), Unchecked{}); }

 private:
  struct Unchecked {};
  UnitVector(Vector coords, Unchecked) : coords_(std::move(coords)) {}
  Vector coords_;
};

/// Vertex of the hypercube: every entry is exactly -1 or +1.
class VertexSigns {
 public:
  explicit VertexSigns(std::vector<int> signs);

  const std::vector<int>& signs() const noexcept { return signs_; }
  std::size_t dim() const noexcept { return signs_.size(); }
  Vector as_vector() const;

 private:
  std::vector<int> signs_;
};

/// Bijection of {0..n-1}; position i holds the pixel index ranked i-th.
class PixelPermutation {
 public:
  explicit PixelPermutation(std::vector<std::size_t> order);

  const std::vector<std::size_t>& order() const noexcept { return order_; }
  std::size_t dim() const noexcept { return order_.size(); }
  std::size_t operator[](std::size_t rank) const { return order_[rank]; }

 private:
  std::vector<std::size_t> order_;
};

/// Angle in [0, pi] radians.
class Angle {
 public:
  explicit Angle(double radians);
  double radians() const noexcept { return radians_; }

 private:
  double radians_;
};

/// Which cap-area normalization to use. kCorrected is the true surface
/// fraction; kLiteral drops the factor 1/2 and reaches 1 at the hemisphere.
enum class CapConvention { kCorrected, kLiteral };

UnitVector sample_uniform_sphere(std::size_t n, Rng& rng);

std::pair<VertexSigns, PixelPermutation> sample_vertex_and_permutation(std::size_t n, Rng& rng);

/// Fraction of the (n-1)-sphere in R^n covered by a cap of half-angle alpha.
double cap_fraction(std::size_t n, Angle alpha, CapConvention convention = CapConvention::kCorrected);

Angle angle_between(const UnitVector& a, const UnitVector& b);

/// Angle between two non-zero vectors.
Angle angle_between(const Vector& a, const Vector& b);

/// Nearest point to delta among vectors of norm min(eps, |delta|) whose angle
/// with u is at most alpha.
///
/// Directions already inside the cap are kept; otherwise the result is
/// rotated in the plane spanned by u and delta onto the cap boundary. When
/// delta is antipodal to u the rotation plane is fixed by the first canonical
/// basis vector not parallel to u.
Vector project_to_cap(const Vector& delta, const UnitVector& u, Angle alpha, double eps);

}  // namespace geometry
}  // namespace advsparse
