// advsparse: command-line driver for dataset generation, training, sparsity
// evaluation, epsilon sweeps and the finite-set theory table.
//
// Exit codes: 0 success, 2 usage or input error, 3 numeric or consistency error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "advsparse/attack.hpp"
#include "advsparse/errors.hpp"
#include "advsparse/estimator.hpp"
#include "advsparse/harness.hpp"
#include "advsparse/micronet.hpp"

namespace fs = std::filesystem;
using advsparse::harness::ExperimentConfig;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

// Flag values; only flags the user actually passed override the config file.
struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
  std::optional<std::string> norm;
  std::optional<double> eps;
  std::optional<std::size_t> steps;
  std::optional<double> step_size;
  std::optional<std::string> ascent;
  std::optional<std::size_t> directions;
  std::optional<std::size_t> search_steps;
  std::optional<std::size_t> max_points;
  bool warm_start = false;
  std::optional<std::string> model;
  std::optional<std::string> dataset;
  std::optional<std::string> test_dataset;
  std::optional<std::vector<double>> eps_list;
  std::optional<std::string> generator;
  std::optional<std::size_t> n;
  std::optional<std::size_t> classes;
  std::optional<std::size_t> size;
  std::optional<double> noise;
  std::optional<double> separation;
  std::optional<std::size_t> test_size;
  std::optional<std::vector<std::size_t>> hidden;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch;
  std::optional<std::vector<std::size_t>> n_list;
  std::optional<std::vector<double>> k_list;
  std::optional<std::size_t> trials;
  std::optional<std::string> format;
};

template <typename T, typename U>
void override_with(const std::optional<T>& flag, U& target) {
  if (flag) target = *flag;
}

ExperimentConfig resolve(const Flags& f) {
  ExperimentConfig c = f.config_path.empty() ? ExperimentConfig{} : advsparse::harness::load_config_file(f.config_path);
  if (f.seed) c.seed = f.seed;
  override_with(f.workers, c.workers);
  override_with(f.out, c.out_path);
  if (f.norm) c.threat.norm = advsparse::attack::parse_norm(*f.norm);
  override_with(f.eps, c.threat.eps);
  override_with(f.steps, c.attack.steps);
  if (f.step_size) c.attack.step_size = f.step_size;
  if (f.ascent) c.attack.ascent = advsparse::attack::parse_ascent(*f.ascent);
  override_with(f.directions, c.directions);
  override_with(f.search_steps, c.search_steps);
  override_with(f.max_points, c.max_points);
  if (f.warm_start) c.warm_start = true;
  override_with(f.model, c.model_path);
  override_with(f.dataset, c.dataset_path);
  override_with(f.test_dataset, c.test_dataset_path);
  override_with(f.eps_list, c.eps_list);
  if (f.generator) c.data.generator = advsparse::parse_generator(*f.generator);
  override_with(f.n, c.data.n);
  override_with(f.classes, c.data.num_classes);
  override_with(f.size, c.data.size);
  override_with(f.noise, c.data.noise);
  override_with(f.separation, c.data.separation);
  override_with(f.test_size, c.data.test_size);
  override_with(f.hidden, c.train.hidden);
  override_with(f.epochs, c.train.epochs);
  override_with(f.lr, c.train.lr);
  override_with(f.batch, c.train.batch);
  override_with(f.n_list, c.theory_n);
  override_with(f.k_list, c.theory_k);
  override_with(f.trials, c.theory_trials);
  if (f.norm) c.theory_norm = advsparse::attack::parse_norm(*f.norm);
  if (c.workers == 0) throw advsparse::UsageError("--workers must be >= 1");
  return c;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw advsparse::UsageError("cannot write output file: " + path);
  out << text;
}

const std::string& require_path(const std::string& path, const char* what) {
  if (path.empty()) throw advsparse::UsageError(std::string("missing ") + what + " path");
  if (!fs::exists(path)) throw advsparse::UsageError(std::string(what) + " not found: " + path);
  return path;
}

fs::path metrics_path(const std::string& model_path) {
  fs::path p(model_path);
  p.replace_extension(".metrics.json");
  return p;
}

int run_gen_data(const ExperimentConfig& c) {
  if (c.out_path.empty()) throw advsparse::UsageError("gen-data needs --out <file.csv>");
  auto spec = c.data;
  spec.seed = c.require_seed();
  if (spec.test_size == 0) {
    advsparse::save_dataset(advsparse::generate_dataset(spec), c.out_path);
    return 0;
  }
  if (c.test_dataset_path.empty()) throw advsparse::UsageError("--test-size needs --test <file.csv>");
  spec.size += spec.test_size;
  const auto [train, test] = advsparse::split_dataset(advsparse::generate_dataset(spec), spec.test_size);
  advsparse::save_dataset(train, c.out_path);
  advsparse::save_dataset(test, c.test_dataset_path);
  return 0;
}

int run_train(const ExperimentConfig& c, bool adversarial) {
  const auto train = advsparse::load_dataset(require_path(c.dataset_path, "dataset"));
  std::optional<advsparse::Dataset> test;
  if (!c.test_dataset_path.empty()) test = advsparse::load_dataset(require_path(c.test_dataset_path, "test dataset"));
  if (c.out_path.empty()) throw advsparse::UsageError("training needs --out <model.json>");

  auto train_cfg = c.train;
  train_cfg.seed = c.require_seed();
  const advsparse::Dataset* holdout = test ? &*test : nullptr;
  const auto result = adversarial ? advsparse::attack::adversarial_train(train, c.threat, c.attack, train_cfg, holdout)
                                  : advsparse::train_sgd(train, train_cfg, holdout);

  std::optional<double> adv_acc;
  if (c.threat.eps > 0.0) {
    adv_acc = advsparse::attack::adversarial_accuracy(result.model, test ? *test : train, c.threat, c.attack, c.workers);
  }
  advsparse::save_model(result.model, c.out_path);
  const auto metrics =
      advsparse::harness::train_metrics_json(result, adv_acc, c, adversarial ? "advtrain" : "train");
  write_text(metrics_path(c.out_path).string(), metrics.dump(2) + "\n");
  return 0;
}

int run_sparsity(const ExperimentConfig& c) {
  const auto model = advsparse::load_model(require_path(c.model_path, "model"));
  const auto data = advsparse::load_dataset(require_path(c.dataset_path, "dataset"));
  const auto report = advsparse::estimator::dataset_eval(model, data, c.threat, c.estimator_config());
  const auto doc = advsparse::harness::report_to_json(report, c, advsparse::harness::git_blob_hash_file(c.model_path));
  write_text(c.out_path, doc.dump(2) + "\n");
  return 0;
}

int run_sweep(const ExperimentConfig& c) {
  const auto model = advsparse::load_model(require_path(c.model_path, "model"));
  const auto data = advsparse::load_dataset(require_path(c.dataset_path, "dataset"));
  const auto rows = advsparse::estimator::epsilon_sweep(model, data, c.eps_list, c.threat.norm, c.estimator_config());
  write_text(c.out_path, advsparse::harness::sweep_to_csv(rows));
  return 0;
}

int run_theory(const ExperimentConfig& c, const std::optional<std::string>& format) {
  const auto rows = advsparse::harness::theory_table(c.theory_n, c.theory_k, c.theory_trials, c.require_seed(),
                                                     c.theory_norm, c.workers);
  std::string fmt = format.value_or(fs::path(c.out_path).extension() == ".json" ? "json" : "csv");
  if (fmt == "json") {
    write_text(c.out_path, advsparse::harness::theory_to_json(rows).dump(2) + "\n");
  } else if (fmt == "csv") {
    write_text(c.out_path, advsparse::harness::theory_to_csv(rows));
  } else {
    throw advsparse::UsageError("unknown --format '" + fmt + "' (expected csv or json)");
  }
  return 0;
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_path, "JSON experiment config; flags override its values");
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--workers", f.workers, "Worker threads (results do not depend on it)");
  cmd->add_option("--out", f.out, "Output path (stdout when omitted, where allowed)");
}

void add_threat(CLI::App* cmd, Flags& f) {
  cmd->add_option("--norm", f.norm, "Threat model norm: l2 or linf");
  cmd->add_option("--eps", f.eps, "Threat radius");
  cmd->add_option("--steps", f.steps, "PGD iterations");
  cmd->add_option("--step-size", f.step_size, "PGD step size (default 2.5*eps/steps for l2, eps/4 for linf)");
  cmd->add_option("--ascent", f.ascent, "PGD ascent: sign or normalized");
}

void add_estimator(CLI::App* cmd, Flags& f) {
  cmd->add_option("--directions", f.directions, "Directions per point (N)");
  cmd->add_option("--search-steps", f.search_steps, "Binary search steps (K)");
  cmd->add_option("--max-points", f.max_points, "Vulnerable points used for residual sparsity");
  cmd->add_flag("--warm-start", f.warm_start, "Warm-start each probe from the last success");
  cmd->add_option("--model", f.model, "Model file");
  cmd->add_option("--dataset", f.dataset, "Dataset CSV");
}

void add_training(CLI::App* cmd, Flags& f) {
  cmd->add_option("--dataset", f.dataset, "Training dataset CSV");
  cmd->add_option("--test", f.test_dataset, "Held-out dataset CSV for metrics");
  cmd->add_option("--hidden", f.hidden, "Hidden layer widths")->delimiter(',');
  cmd->add_option("--epochs", f.epochs, "Training epochs");
  cmd->add_option("--lr", f.lr, "Learning rate");
  cmd->add_option("--batch", f.batch, "Minibatch size");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial sparsity toolkit"};
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset (CSV + JSON sidecar)");
  add_common(gen, f);
  gen->add_option("--generator", f.generator, "gaussian-blobs, concentric-rings or xor-grid");
  gen->add_option("--n", f.n, "Input dimension");
  gen->add_option("--classes", f.classes, "Number of classes");
  gen->add_option("--size", f.size, "Number of examples");
  gen->add_option("--noise", f.noise, "Noise standard deviation");
  gen->add_option("--separation", f.separation, "Class separation");
  gen->add_option("--test-size", f.test_size, "Held-out examples from the same distribution");
  gen->add_option("--test", f.test_dataset, "Output CSV for the held-out split");

  auto* train = app.add_subcommand("train", "Train a MicroNet with SGD");
  add_common(train, f);
  add_training(train, f);
  add_threat(train, f);

  auto* advtrain = app.add_subcommand("advtrain", "Adversarially train a MicroNet with PGD examples");
  add_common(advtrain, f);
  add_training(advtrain, f);
  add_threat(advtrain, f);

  auto* sparsity = app.add_subcommand("sparsity", "Accuracy, adversarial accuracy and residual sparsity report");
  add_common(sparsity, f);
  add_threat(sparsity, f);
  add_estimator(sparsity, f);

  auto* sweep = app.add_subcommand("sweep", "Accuracy and sparsity as a function of eps (CSV)");
  add_common(sweep, f);
  add_threat(sweep, f);
  add_estimator(sweep, f);
  sweep->add_option("--eps-list", f.eps_list, "Strictly increasing radii")->delimiter(',');

  auto* theory = app.add_subcommand("theory", "Expected sparsity of random finite adversarial sets");
  add_common(theory, f);
  theory->add_option("--n-list", f.n_list, "Dimensions")->delimiter(',');
  theory->add_option("--k-list", f.k_list, "Adversarial set cardinalities")->delimiter(',');
  theory->add_option("--trials", f.trials, "Monte-Carlo trials per row (0 disables)");
  theory->add_option("--norm", f.norm, "Restrict to l2 or linf");
  theory->add_option("--format", f.format, "csv or json (default from --out extension)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    const ExperimentConfig config = resolve(f);
    if (gen->parsed()) return run_gen_data(config);
    if (train->parsed()) return run_train(config, false);
    if (advtrain->parsed()) return run_train(config, true);
    if (sparsity->parsed()) return run_sparsity(config);
    if (sweep->parsed()) return run_sweep(config);
    if (theory->parsed()) return run_theory(config, f.format);
  } catch (const advsparse::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
