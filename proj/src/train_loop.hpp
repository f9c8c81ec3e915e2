#pragma once

#include <functional>

#include "advsparse/micronet.hpp"

namespace advsparse::detail {

/// Returns the perturbation added to an example before its gradient step.
using Perturber = std::function<Vector(const MicroNet&, const LabeledExample&)>;

TrainResult run_training(const Dataset& train, const TrainConfig& config, const Dataset* holdout,
                         const Perturber& perturb);

}  // namespace advsparse::detail
