#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "advsparse/attack.hpp"
#include "advsparse/dataset.hpp"
#include "advsparse/geometry.hpp"
#include "advsparse/micronet.hpp"

namespace advsparse::estimator {

struct EstimatorConfig {
  std::size_t search_steps = 10;  // K
  std::size_t directions = 100;   // N
  attack::AttackConfig attack;
  std::uint64_t seed = 0;
  /// Start each probe from the perturbation found at the current upper bound.
  bool warm_start = false;
  /// Residual sparsity is averaged over at most this many vulnerable points.
  std::size_t max_points = 100;
  std::size_t workers = 1;

  void validate() const;
};

struct SearchProbe {
  double probe = 0.0;  // alpha in radians or pixel count m
  bool success = false;
};

/// Outcome of one binary search. For L2 `value` is the last probed angle
/// and [lower, upper] the final bracket of width pi * 2^-K. For Linf `value`
/// equals `upper`, the smallest pixel count with a successful probe (or n).
struct DirectionEstimate {
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::vector<SearchProbe> trace;
};

/// Binary search over the cap angle without the vulnerability pre-check.
DirectionEstimate search_cap_angle(const MicroNet& model, const LabeledExample& ex, const geometry::UnitVector& u,
                                   const attack::ThreatModel& threat, const EstimatorConfig& config);

/// Binary search over the free pixel count without the vulnerability pre-check.
DirectionEstimate search_pixel_count(const MicroNet& model, const LabeledExample& ex,
                                     const geometry::VertexSigns& u, const geometry::PixelPermutation& sigma,
                                     const attack::ThreatModel& threat, const EstimatorConfig& config);

/// Angular sparsity along u, or nullopt when the unconstrained attack fails.
std::optional<DirectionEstimate> direction_sparsity_l2(const MicroNet& model, const LabeledExample& ex,
                                                       const geometry::UnitVector& u,
                                                       const attack::ThreatModel& threat,
                                                       const EstimatorConfig& config);

/// Pixel sparsity along (u, sigma), or nullopt when the unconstrained attack fails.
std::optional<DirectionEstimate> direction_sparsity_linf(const MicroNet& model, const LabeledExample& ex,
                                                         const geometry::VertexSigns& u,
                                                         const geometry::PixelPermutation& sigma,
                                                         const attack::ThreatModel& threat,
                                                         const EstimatorConfig& config);

struct SparsityRecord {
  std::size_t point = 0;
  std::size_t direction = 0;
  double value = 0.0;
  bool robust = false;
};

struct PointSparsity {
  double mean = 0.0;
  bool robust = false;
  std::vector<SparsityRecord> records;
};

/// Value reported for points the unconstrained attack cannot break:
/// pi / 2 for L2, n for Linf.
double robust_default(const attack::ThreatModel& threat, std::size_t n);

/// Mean sparsity over config.directions sampled directions. Direction i of
/// point `point_id` is drawn from its own stream, so results do not depend
/// on evaluation order or worker count.
PointSparsity point_sparsity(const MicroNet& model, const LabeledExample& ex, const attack::ThreatModel& threat,
                             const EstimatorConfig& config, std::size_t point_id = 0);

struct PointSummary {
  std::size_t point = 0;
  double mean = 0.0;
};

struct DatasetReport {
  double natural_accuracy = 0.0;
  double adversarial_accuracy = 0.0;
  /// Absent when no point is vulnerable.
  std::optional<double> residual_sparsity;
  std::size_t points = 0;
  std::size_t vulnerable_points = 0;
  std::size_t evaluated_points = 0;
  /// Value a robust point would be assigned (pi / 2 or n).
  double robust_default = 0.0;
  std::vector<PointSummary> per_point;
};

/// Natural and adversarial accuracy over the whole dataset, and residual
/// sparsity over the first config.max_points points the attack breaks.
DatasetReport dataset_eval(const MicroNet& model, const Dataset& data, const attack::ThreatModel& threat,
                           const EstimatorConfig& config);

struct SweepRow {
  double eps = 0.0;
  double natural_accuracy = 0.0;
  double adversarial_accuracy = 0.0;
  std::optional<double> residual_sparsity;
};

/// dataset_eval at each radius; eps_list must be strictly increasing.
std::vector<SweepRow> epsilon_sweep(const MicroNet& model, const Dataset& data, const std::vector<double>& eps_list,
                                    attack::Norm norm, const EstimatorConfig& config);

}  // namespace advsparse::estimator
