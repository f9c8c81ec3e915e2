#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "advsparse/geometry.hpp"
#include "advsparse/micronet.hpp"

namespace advsparse::attack {

enum class Norm { kL2, kLinf };

Norm parse_norm(const std::string& name);
std::string to_string(Norm norm);

/// Norm family and radius. eps = 0 is accepted and makes every attack a no-op.
struct ThreatModel {
  Norm norm = Norm::kL2;
  double eps = 0.5;

  void validate() const;
};

/// Ascent direction per step: sign(grad) as in the classic PGD update, or the
/// gradient rescaled to unit L2 (L2 threat) or unit Linf (Linf threat) norm.
enum class Ascent { kSign, kNormalized };

Ascent parse_ascent(const std::string& name);
std::string to_string(Ascent ascent);

/// kTrueLabel: success when the prediction at x + delta differs from y.
/// kChangedPrediction: success when it differs from the prediction at x; the
/// attack then ascends the loss of that prediction instead of y.
enum class SuccessCriterion { kTrueLabel, kChangedPrediction };

struct AttackConfig {
  std::size_t steps = 20;
  /// Defaults to 2.5 * eps / steps for L2 and eps / 4 for Linf.
  std::optional<double> step_size;
  Ascent ascent = Ascent::kSign;
  SuccessCriterion success = SuccessCriterion::kTrueLabel;
  /// Keep x + delta inside [0, 1]^n. Off by default.
  bool clamp_unit_box = false;
};

double effective_step_size(const AttackConfig& config, const ThreatModel& threat);

struct AttackResult {
  Vector perturbation;
  bool success = false;
};

bool is_adversarial(const MicroNet& model, const LabeledExample& ex, const Vector& delta,
                    SuccessCriterion criterion = SuccessCriterion::kTrueLabel);

/// Projected gradient ascent on the loss inside the eps-ball, starting at zero.
AttackResult pgd(const MicroNet& model, const LabeledExample& ex, const ThreatModel& threat,
                 const AttackConfig& config);

/// L2 PGD whose iterates stay in the spherical cap of axis u and half-angle
/// alpha. Starts at zero unless `warm_start` is given, in which case that
/// perturbation is first projected onto the cap.
AttackResult pgd_cap(const MicroNet& model, const LabeledExample& ex, const geometry::UnitVector& u,
                     geometry::Angle alpha, const ThreatModel& threat, const AttackConfig& config,
                     const Vector* warm_start = nullptr);

/// Linf PGD started at eps * u in which only the pixels sigma[0..m) move; the
/// remaining pixels are pinned to eps * u after every step.
AttackResult pgd_vertex(const MicroNet& model, const LabeledExample& ex, const geometry::VertexSigns& u,
                        const geometry::PixelPermutation& sigma, std::size_t m, const ThreatModel& threat,
                        const AttackConfig& config, const Vector* warm_start = nullptr);

/// Replaces each example by its PGD-perturbed version before every gradient
/// step. With eps = 0 this follows train_sgd exactly.
TrainResult adversarial_train(const Dataset& train, const ThreatModel& threat, const AttackConfig& attack,
                              const TrainConfig& config, const Dataset* holdout = nullptr);

/// Fraction of examples on which pgd fails.
double adversarial_accuracy(const MicroNet& model, const Dataset& data, const ThreatModel& threat,
                            const AttackConfig& config, std::size_t workers = 1);

}  // namespace advsparse::attack
