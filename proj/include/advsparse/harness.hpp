#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advsparse/attack.hpp"
#include "advsparse/dataset.hpp"
#include "advsparse/estimator.hpp"
#include "advsparse/micronet.hpp"

namespace advsparse::harness {

inline constexpr int kConfigVersion = 1;

/// Every knob of every subcommand, as one versioned document. Reports embed
/// it verbatim (minus the worker count, which never affects results).
struct ExperimentConfig {
  std::optional<std::uint64_t> seed;

  attack::ThreatModel threat;
  std::vector<double> eps_list;
  attack::AttackConfig attack;

  std::size_t directions = 100;
  std::size_t search_steps = 10;
  std::size_t max_points = 100;
  bool warm_start = false;
  std::size_t workers = 1;

  std::string model_path;
  std::string dataset_path;
  std::string test_dataset_path;
  std::string out_path;

  TrainConfig train;

  SyntheticDatasetSpec data;

  std::vector<std::size_t> theory_n;
  std::vector<double> theory_k;
  std::size_t theory_trials = 10000;
  std::optional<attack::Norm> theory_norm;

  std::uint64_t require_seed() const;
  estimator::EstimatorConfig estimator_config() const;
};

nlohmann::json config_to_json(const ExperimentConfig& config);

/// Fields absent from `doc` keep their current value in `config`.
void merge_config_json(ExperimentConfig& config, const nlohmann::json& doc);

ExperimentConfig load_config_file(const std::string& path);

/// Git blob id: SHA-1 of "blob <size>\0" followed by the bytes.
std::string git_blob_hash(const std::string& bytes);
std::string git_blob_hash_file(const std::string& path);

nlohmann::json report_to_json(const estimator::DatasetReport& report, const ExperimentConfig& config,
                              const std::string& model_hash);

/// Header: epsilon,nat_acc,adv_acc,residual_sparsity (empty when absent).
std::string sweep_to_csv(const std::vector<estimator::SweepRow>& rows);

struct TheoryRow {
  attack::Norm norm = attack::Norm::kL2;
  std::size_t n = 0;
  double k = 1.0;
  double closed_form = 0.0;
  std::optional<double> mc_mean;
  std::optional<double> mc_stderr;
  std::optional<double> lower;
  std::optional<double> upper;
};

/// Closed forms, Monte-Carlo estimates (skipped when trials == 0 or k is too
/// large to sample) and Linf bounds for every (norm, n, k). Throws
/// ConsistencyError when a closed form leaves its bounds.
std::vector<TheoryRow> theory_table(const std::vector<std::size_t>& n_list, const std::vector<double>& k_list,
                                    std::size_t trials, std::uint64_t seed, std::optional<attack::Norm> norm,
                                    std::size_t workers = 1);

std::string theory_to_csv(const std::vector<TheoryRow>& rows);
nlohmann::json theory_to_json(const std::vector<TheoryRow>& rows);

/// Metrics written next to a trained model.
nlohmann::json train_metrics_json(const TrainResult& result, std::optional<double> adv_acc,
                                  const ExperimentConfig& config, const std::string& command);

}  // namespace advsparse::harness
