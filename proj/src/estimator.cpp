#include "advsparse/estimator.hpp"

#include <algorithm>
#include <numeric>

#include "advsparse/errors.hpp"
#include "advsparse/parallel.hpp"

namespace advsparse::estimator {

using attack::Norm;
using attack::ThreatModel;

void EstimatorConfig::validate() const {
  if (search_steps < 1) throw UsageError("search steps (K) must be >= 1");
  if (directions < 1) throw UsageError("directions (N) must be >= 1");
  if (attack.steps < 1) throw UsageError("attack steps must be >= 1");
}

DirectionEstimate search_cap_angle(const MicroNet& model, const LabeledExample& ex, const geometry::UnitVector& u,
                                   const ThreatModel& threat, const EstimatorConfig& config) {
  config.validate();
  DirectionEstimate est{0.0, 0.0, geometry::kPi, {}};
  std::optional<Vector> last_success;
  for (std::size_t k = 0; k < config.search_steps; ++k) {
    const double mid = 0.5 * (est.lower + est.upper);
    const Vector* warm = config.warm_start && last_success ? &*last_success : nullptr;
    auto result = attack::pgd_cap(model, ex, u, geometry::Angle(mid), threat, config.attack, warm);
    est.trace.push_back({mid, result.success});
    if (result.success) {
      est.upper = mid;
      last_success = std::move(result.perturbation);
    } else {
      est.lower = mid;
    }
    est.value = mid;
  }
  return est;
}

DirectionEstimate search_pixel_count(const MicroNet& model, const LabeledExample& ex,
                                     const geometry::VertexSigns& u, const geometry::PixelPermutation& sigma,
                                     const ThreatModel& threat, const EstimatorConfig& config) {
  config.validate();
  // Bracket (lower, upper]: lower = -1 stands for "no failing count seen yet";
  // upper = n is assumed adversarial because the unconstrained attack succeeded.
  long lower = -1;
  long upper = static_cast<long>(u.dim());
  DirectionEstimate est;
  std::optional<Vector> last_success;
  while (upper - lower > 1) {
    const long mid = lower + (upper - lower) / 2;
    const Vector* warm = config.warm_start && last_success ? &*last_success : nullptr;
    auto result = attack::pgd_vertex(model, ex, u, sigma, static_cast<std::size_t>(mid), threat, config.attack, warm);
    est.trace.push_back({static_cast<double>(mid), result.success});
    if (result.success) {
      upper = mid;
      last_success = std::move(result.perturbation);
    } else {
      lower = mid;
    }
  }
  est.lower = static_cast<double>(lower);
  est.upper = static_cast<double>(upper);
  est.value = est.upper;
  return est;
}

std::optional<DirectionEstimate> direction_sparsity_l2(const MicroNet& model, const LabeledExample& ex,
                                                       const geometry::UnitVector& u, const ThreatModel& threat,
                                                       const EstimatorConfig& config) {
  if (!attack::pgd(model, ex, threat, config.attack).success) return std::nullopt;
  return search_cap_angle(model, ex, u, threat, config);
}

std::optional<DirectionEstimate> direction_sparsity_linf(const MicroNet& model, const LabeledExample& ex,
                                                         const geometry::VertexSigns& u,
                                                         const geometry::PixelPermutation& sigma,
                                                         const ThreatModel& threat, const EstimatorConfig& config) {
  if (!attack::pgd(model, ex, threat, config.attack).success) return std::nullopt;
  return search_pixel_count(model, ex, u, sigma, threat, config);
}

double robust_default(const ThreatModel& threat, std::size_t n) {
  return threat.norm == Norm::kL2 ? 0.5 * geometry::kPi : static_cast<double>(n);
}

namespace {

// Sparsity along every sampled direction of a point known to be vulnerable.
PointSparsity sample_directions(const MicroNet& model, const LabeledExample& ex, const ThreatModel& threat,
                                const EstimatorConfig& config, std::size_t point_id) {
  const std::size_t n = static_cast<std::size_t>(ex.x.size());
  PointSparsity out;
  out.records.resize(config.directions);
  parallel_for(config.directions, config.workers, [&](std::size_t i) {
    Rng rng = make_rng(config.seed, Stream::kDirections, point_id, i);
    double value = 0.0;
    if (threat.norm == Norm::kL2) {
      const auto u = geometry::sample_uniform_sphere(n, rng);
      value = search_cap_angle(model, ex, u, threat, config).value;
    } else {
      const auto [u, sigma] = geometry::sample_vertex_and_permutation(n, rng);
      value = search_pixel_count(model, ex, u, sigma, threat, config).value;
    }
    out.records[i] = {point_id, i, value, false};
  });
  double total = 0.0;
  for (const auto& r : out.records) total += r.value;
  out.mean = total / static_cast<double>(config.directions);
  return out;
}

}  // namespace

PointSparsity point_sparsity(const MicroNet& model, const LabeledExample& ex, const ThreatModel& threat,
                             const EstimatorConfig& config, std::size_t point_id) {
  config.validate();
  threat.validate();
  if (!attack::pgd(model, ex, threat, config.attack).success) {
    return {robust_default(threat, static_cast<std::size_t>(ex.x.size())), true, {}};
  }
  return sample_directions(model, ex, threat, config, point_id);
}

DatasetReport dataset_eval(const MicroNet& model, const Dataset& data, const ThreatModel& threat,
                           const EstimatorConfig& config) {
  config.validate();
  threat.validate();
  if (data.empty()) throw UsageError("cannot evaluate an empty dataset");

  DatasetReport report;
  report.points = data.size();
  report.robust_default = robust_default(threat, data.n);
  report.natural_accuracy = accuracy(model, data);

  std::vector<char> vulnerable(data.size(), 0);
  parallel_for(data.size(), config.workers, [&](std::size_t i) {
    vulnerable[i] = attack::pgd(model, data.examples[i], threat, config.attack).success ? 1 : 0;
  });
  report.vulnerable_points = static_cast<std::size_t>(std::count(vulnerable.begin(), vulnerable.end(), 1));
  report.adversarial_accuracy =
      static_cast<double>(data.size() - report.vulnerable_points) / static_cast<double>(data.size());

  double total = 0.0;
  for (std::size_t i = 0; i < data.size() && report.evaluated_points < config.max_points; ++i) {
    if (!vulnerable[i]) continue;
    const auto point = sample_directions(model, data.examples[i], threat, config, i);
    report.per_point.push_back({i, point.mean});
    total += point.mean;
    ++report.evaluated_points;
  }
  if (report.evaluated_points > 0) report.residual_sparsity = total / static_cast<double>(report.evaluated_points);
  return report;
}

std::vector<SweepRow> epsilon_sweep(const MicroNet& model, const Dataset& data, const std::vector<double>& eps_list,
                                    Norm norm, const EstimatorConfig& config) {
  if (eps_list.empty()) throw UsageError("epsilon list is empty");
  for (std::size_t i = 1; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > eps_list[i - 1])) throw UsageError("epsilon list must be strictly increasing");
  }
  std::vector<SweepRow> rows;
  for (double eps : eps_list) {
    const auto report = dataset_eval(model, data, ThreatModel{norm, eps}, config);
    rows.push_back({eps, report.natural_accuracy, report.adversarial_accuracy, report.residual_sparsity});
  }
  return rows;
}

}  // namespace advsparse::estimator
