#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "advsparse/dataset.hpp"
#include "advsparse/geometry.hpp"

namespace advsparse {

using Matrix = Eigen::MatrixXd;

struct Layer {
  Matrix weights;  // out x in
  Vector bias;     // out
};

struct LossAndGrad {
  double loss = 0.0;
  Vector grad;
};

/// Parameter gradients, shaped like the model's layers.
struct ParamGrads {
  std::vector<Layer> layers;
};

/// Fully-connected classifier: rectifier between layers, identity on the
/// last one. Immutable apart from assignment; evaluation is thread-safe.
class MicroNet {
 public:
  explicit MicroNet(std::vector<Layer> layers);

  /// He-normal weights, zero biases.
  static MicroNet random(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t num_classes,
                         Rng& rng);

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  Vector forward(const Vector& x) const;

  /// Argmax of the logits; ties go to the lowest index.
  int predict(const Vector& x) const;

  /// Softmax cross-entropy and its gradient with respect to the input.
  LossAndGrad loss_and_input_grad(const Vector& x, int y) const;

  /// Adds the parameter gradient of the loss at (x, y) into `acc`, returns the loss.
  double accumulate_param_grads(const Vector& x, int y, ParamGrads& acc) const;

  ParamGrads zero_grads() const;

  /// p <- p - lr * g for every parameter.
  void apply_update(const ParamGrads& grads, double lr);

  bool operator==(const MicroNet& other) const;

 private:
  void check_input(const Vector& x) const;

  std::vector<Layer> layers_;
  std::size_t input_dim_ = 0;
  std::size_t num_classes_ = 0;
};

double accuracy(const MicroNet& model, const Dataset& data);

// --- persistence -----------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

/// Versioned JSON, weights row-major. Doubles are written in shortest
/// round-trip form so a save/load cycle is bit-exact.
std::string model_to_json(const MicroNet& model);
MicroNet model_from_json(const std::string& text);
void save_model(const MicroNet& model, const std::filesystem::path& path);
MicroNet load_model(const std::filesystem::path& path);

// --- training ----------------------------------------------------------------

struct TrainConfig {
  std::vector<std::size_t> hidden{32};
  std::size_t epochs = 20;
  double lr = 0.05;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
};

struct TrainResult {
  MicroNet model;
  double final_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> test_accuracy;
};

/// Minibatch SGD on softmax cross-entropy. Deterministic given config.seed.
/// Throws TrainingError when the loss becomes non-finite.
TrainResult train_sgd(const Dataset& train, const TrainConfig& config, const Dataset* holdout = nullptr);

// --- analytic linear oracle ----------------------------------------------------

/// Binary classifier predicting class 1 when w.x + b > 0, else class 0.
struct LinearOracle {
  Vector w;
  double b = 0.0;

  int predict(const Vector& x) const;

  /// Equivalent two-logit MicroNet whose logit difference is w.x + b.
  MicroNet to_micronet() const;
};

/// The set of unit perturbations delta with misclassified x + eps * delta.
struct LinearCap {
  geometry::Angle beta;
  geometry::UnitVector center;
};

/// Adversarial cap of a linear classifier, or nullopt when the point is robust.
std::optional<LinearCap> linear_adversarial_cap(const LinearOracle& oracle, const LabeledExample& ex, double eps);

/// max(0, angle(u, center) - beta). Throws RobustPoint when the cap is empty.
geometry::Angle linear_direction_sparsity(const LinearOracle& oracle, const LabeledExample& ex, double eps,
                                          const geometry::UnitVector& u);

/// Mean of max(0, theta - beta) for theta the angle between a fixed axis and
/// a uniform direction in R^n.
double expected_cap_sparsity(double beta, std::size_t n);

/// Expected sparsity over uniform directions. Throws RobustPoint when the cap is empty.
geometry::Angle linear_expected_sparsity(const LinearOracle& oracle, const LabeledExample& ex, double eps);

}  // namespace advsparse
