#include "advsparse/attack.hpp"

#include <cmath>
#include <vector>

#include "advsparse/errors.hpp"
#include "advsparse/parallel.hpp"
#include "train_loop.hpp"

namespace advsparse::attack {

Norm parse_norm(const std::string& name) {
  if (name == "l2" || name == "L2") return Norm::kL2;
  if (name == "linf" || name == "Linf" || name == "LINF") return Norm::kLinf;
  throw UsageError("unknown norm '" + name + "' (expected l2 or linf)");
}

std::string to_string(Norm norm) { return norm == Norm::kL2 ? "l2" : "linf"; }

Ascent parse_ascent(const std::string& name) {
  if (name == "sign") return Ascent::kSign;
  if (name == "normalized") return Ascent::kNormalized;
  throw UsageError("unknown ascent mode '" + name + "' (expected sign or normalized)");
}

std::string to_string(Ascent ascent) { return ascent == Ascent::kSign ? "sign" : "normalized"; }

void ThreatModel::validate() const {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw DomainError("threat radius must be finite and >= 0");
}

double effective_step_size(const AttackConfig& config, const ThreatModel& threat) {
  if (config.step_size) {
    if (!(*config.step_size >= 0.0)) throw DomainError("step size must be >= 0");
    return *config.step_size;
  }
  if (config.steps == 0) throw DomainError("attack needs at least one step");
  return threat.norm == Norm::kL2 ? 2.5 * threat.eps / static_cast<double>(config.steps) : threat.eps / 4.0;
}

bool is_adversarial(const MicroNet& model, const LabeledExample& ex, const Vector& delta,
                    SuccessCriterion criterion) {
  const int reference = criterion == SuccessCriterion::kTrueLabel ? ex.y : model.predict(ex.x);
  return model.predict(ex.x + delta) != reference;
}

namespace {

struct Stepper {
  const MicroNet& model;
  const LabeledExample& ex;
  const ThreatModel& threat;
  const AttackConfig& config;
  double eta;
  // Label whose loss is ascended: y, or f(x) under the changed-prediction criterion.
  int target;

  Stepper(const MicroNet& m, const LabeledExample& e, const ThreatModel& t, const AttackConfig& c)
      : model(m),
        ex(e),
        threat(t),
        config(c),
        eta(effective_step_size(c, t)),
        target(c.success == SuccessCriterion::kTrueLabel ? e.y : m.predict(e.x)) {}

  // delta + eta * ascent(grad L(x + delta, target)).
  Vector ascend(const Vector& delta) const {
    const Vector g = model.loss_and_input_grad(ex.x + delta, target).grad;
    if (!g.allFinite()) throw AttackError("non-finite input gradient during attack");
    if (config.ascent == Ascent::kSign) return delta + eta * g.array().sign().matrix();
    const double scale = threat.norm == Norm::kL2 ? g.norm() : g.lpNorm<Eigen::Infinity>();
    if (!(scale > 0.0)) return delta;
    return delta + (eta / scale) * g;
  }

  void clamp_box(Vector& delta) const {
    if (config.clamp_unit_box) delta = (ex.x + delta).cwiseMax(0.0).cwiseMin(1.0) - ex.x;
  }

  AttackResult finish(Vector delta) const {
    const bool success = is_adversarial(model, ex, delta, config.success);
    return {std::move(delta), success};
  }
};

void check_dims(const MicroNet& model, const LabeledExample& ex, std::size_t constraint_dim) {
  if (static_cast<std::size_t>(ex.x.size()) != model.input_dim() || constraint_dim != model.input_dim()) {
    throw InvalidDimension("attack inputs do not match the model dimension");
  }
}

}  // namespace

AttackResult pgd(const MicroNet& model, const LabeledExample& ex, const ThreatModel& threat,
                 const AttackConfig& config) {
  threat.validate();
  check_dims(model, ex, model.input_dim());
  const Stepper step(model, ex, threat, config);
  Vector delta = Vector::Zero(ex.x.size());
  if (threat.eps == 0.0) return step.finish(std::move(delta));
  for (std::size_t k = 0; k < config.steps; ++k) {
    delta = step.ascend(delta);
    if (threat.norm == Norm::kLinf) {
      delta = delta.cwiseMax(-threat.eps).cwiseMin(threat.eps);
    } else {
      const double length = delta.norm();
      if (length > threat.eps) delta *= threat.eps / length;
    }
    step.clamp_box(delta);
  }
  return step.finish(std::move(delta));
}

AttackResult pgd_cap(const MicroNet& model, const LabeledExample& ex, const geometry::UnitVector& u,
                     geometry::Angle alpha, const ThreatModel& threat, const AttackConfig& config,
                     const Vector* warm_start) {
  threat.validate();
  if (threat.norm != Norm::kL2) throw UsageError("cap-constrained PGD requires an L2 threat model");
  check_dims(model, ex, u.dim());
  const Stepper step(model, ex, threat, config);
  Vector delta = Vector::Zero(ex.x.size());
  if (threat.eps == 0.0) return step.finish(std::move(delta));
  if (warm_start != nullptr && warm_start->norm() > 0.0) {
    delta = geometry::project_to_cap(*warm_start, u, alpha, threat.eps);
  }
  for (std::size_t k = 0; k < config.steps; ++k) {
    Vector next = step.ascend(delta);
    // The cap projection of the origin is undefined; stay put until a step moves us.
    if (!(next.norm() > 0.0)) continue;
    delta = geometry::project_to_cap(next, u, alpha, threat.eps);
    step.clamp_box(delta);
  }
  return step.finish(std::move(delta));
}

AttackResult pgd_vertex(const MicroNet& model, const LabeledExample& ex, const geometry::VertexSigns& u,
                        const geometry::PixelPermutation& sigma, std::size_t m, const ThreatModel& threat,
                        const AttackConfig& config, const Vector* warm_start) {
  threat.validate();
  if (threat.norm != Norm::kLinf) throw UsageError("pixel-constrained PGD requires an Linf threat model");
  check_dims(model, ex, u.dim());
  if (sigma.dim() != u.dim()) throw InvalidDimension("vertex and permutation dimensions differ");
  const std::size_t n = u.dim();
  if (m > n) throw DomainError("free pixel count exceeds the dimension");
  const Stepper step(model, ex, threat, config);

  const Vector anchor = threat.eps * u.as_vector();
  auto pin = [&](Vector& delta) {
    for (std::size_t rank = m; rank < n; ++rank) {
      const auto pixel = static_cast<Eigen::Index>(sigma[rank]);
      delta[pixel] = anchor[pixel];
    }
  };

  Vector delta = anchor;
  if (warm_start != nullptr) {
    if (warm_start->size() != anchor.size()) throw InvalidDimension("warm start has the wrong dimension");
    delta = warm_start->cwiseMax(-threat.eps).cwiseMin(threat.eps);
  }
  pin(delta);
  if (m == 0 || threat.eps == 0.0) return step.finish(std::move(delta));
  for (std::size_t k = 0; k < config.steps; ++k) {
    delta = step.ascend(delta).cwiseMax(-threat.eps).cwiseMin(threat.eps);
    pin(delta);
    step.clamp_box(delta);
  }
  return step.finish(std::move(delta));
}

TrainResult adversarial_train(const Dataset& train, const ThreatModel& threat, const AttackConfig& attack,
                              const TrainConfig& config, const Dataset* holdout) {
  threat.validate();
  if (threat.eps == 0.0) return detail::run_training(train, config, holdout, nullptr);
  auto perturb = [&](const MicroNet& model, const LabeledExample& ex) {
    return pgd(model, ex, threat, attack).perturbation;
  };
  return detail::run_training(train, config, holdout, perturb);
}

double adversarial_accuracy(const MicroNet& model, const Dataset& data, const ThreatModel& threat,
                            const AttackConfig& config, std::size_t workers) {
  if (data.empty()) throw DomainError("adversarial accuracy of an empty dataset");
  std::vector<char> robust(data.size(), 0);
  parallel_for(data.size(), workers,
               [&](std::size_t i) { robust[i] = pgd(model, data.examples[i], threat, config).success ? 0 : 1; });
  std::size_t count = 0;
  for (char r : robust) count += static_cast<std::size_t>(r);
  return static_cast<double>(count) / static_cast<double>(data.size());
}

}  // namespace advsparse::attack
