#include "advsparse/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "advsparse/errors.hpp"
#include "advsparse/theory.hpp"

namespace advsparse::harness {

using json = nlohmann::json;

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string success_name(attack::SuccessCriterion c) {
  return c == attack::SuccessCriterion::kTrueLabel ? "true-label" : "changed-prediction";
}

attack::SuccessCriterion parse_success(const std::string& name) {
  if (name == "true-label") return attack::SuccessCriterion::kTrueLabel;
  if (name == "changed-prediction") return attack::SuccessCriterion::kChangedPrediction;
  throw UsageError("unknown success criterion '" + name + "'");
}

template <typename T>
void read_if_present(const json& obj, const char* key, T& target) {
  if (obj.contains(key) && !obj.at(key).is_null()) target = obj.at(key).get<T>();
}

}  // namespace

std::uint64_t ExperimentConfig::require_seed() const {
  if (!seed) throw UsageError("a seed is required (--seed or \"seed\" in the config file)");
  return *seed;
}

estimator::EstimatorConfig ExperimentConfig::estimator_config() const {
  estimator::EstimatorConfig cfg;
  cfg.search_steps = search_steps;
  cfg.directions = directions;
  cfg.attack = attack;
  cfg.seed = require_seed();
  cfg.warm_start = warm_start;
  cfg.max_points = max_points;
  cfg.workers = workers;
  return cfg;
}

json config_to_json(const ExperimentConfig& c) {
  json step_size = c.attack.step_size ? json(*c.attack.step_size) : json(nullptr);
  json seed = c.seed ? json(*c.seed) : json(nullptr);
  json theory_norm = c.theory_norm ? json(attack::to_string(*c.theory_norm)) : json(nullptr);
  return {
      {"version", kConfigVersion},
      {"seed", seed},
      {"threat", {{"norm", attack::to_string(c.threat.norm)}, {"eps", c.threat.eps}}},
      {"eps_list", c.eps_list},
      {"attack",
       {{"steps", c.attack.steps},
        {"step_size", step_size},
        {"ascent", attack::to_string(c.attack.ascent)},
        {"success", success_name(c.attack.success)},
        {"clamp_unit_box", c.attack.clamp_unit_box}}},
      {"estimator",
       {{"directions", c.directions},
        {"search_steps", c.search_steps},
        {"max_points", c.max_points},
        {"warm_start", c.warm_start}}},
      {"paths",
       {{"model", c.model_path}, {"dataset", c.dataset_path}, {"test_dataset", c.test_dataset_path}, {"out", c.out_path}}},
      {"train", {{"hidden", c.train.hidden}, {"epochs", c.train.epochs}, {"lr", c.train.lr}, {"batch", c.train.batch}}},
      {"data",
       {{"generator", to_string(c.data.generator)},
        {"n", c.data.n},
        {"C", c.data.num_classes},
        {"size", c.data.size},
        {"noise", c.data.noise},
        {"separation", c.data.separation},
        {"test_size", c.data.test_size}}},
      {"theory", {{"n", c.theory_n}, {"k", c.theory_k}, {"trials", c.theory_trials}, {"norm", theory_norm}}},
  };
}

void merge_config_json(ExperimentConfig& c, const json& doc) {
  if (!doc.is_object()) throw ParseError("config must be a JSON object", "/");
  try {
    if (doc.contains("version") && doc.at("version").get<int>() != kConfigVersion) {
      throw UnsupportedVersion("unsupported config version " + doc.at("version").dump());
    }
    if (doc.contains("seed") && !doc.at("seed").is_null()) c.seed = doc.at("seed").get<std::uint64_t>();
    read_if_present(doc, "workers", c.workers);
    read_if_present(doc, "eps_list", c.eps_list);
    if (doc.contains("threat")) {
      const json& t = doc.at("threat");
      if (t.contains("norm")) c.threat.norm = attack::parse_norm(t.at("norm").get<std::string>());
      read_if_present(t, "eps", c.threat.eps);
    }
    if (doc.contains("attack")) {
      const json& a = doc.at("attack");
      read_if_present(a, "steps", c.attack.steps);
      if (a.contains("step_size")) {
        c.attack.step_size = a.at("step_size").is_null() ? std::nullopt : std::optional<double>(a.at("step_size").get<double>());
      }
      if (a.contains("ascent")) c.attack.ascent = attack::parse_ascent(a.at("ascent").get<std::string>());
      if (a.contains("success")) c.attack.success = parse_success(a.at("success").get<std::string>());
      read_if_present(a, "clamp_unit_box", c.attack.clamp_unit_box);
    }
    if (doc.contains("estimator")) {
      const json& e = doc.at("estimator");
      read_if_present(e, "directions", c.directions);
      read_if_present(e, "search_steps", c.search_steps);
      read_if_present(e, "max_points", c.max_points);
      read_if_present(e, "warm_start", c.warm_start);
    }
    if (doc.contains("paths")) {
      const json& p = doc.at("paths");
      read_if_present(p, "model", c.model_path);
      read_if_present(p, "dataset", c.dataset_path);
      read_if_present(p, "test_dataset", c.test_dataset_path);
      read_if_present(p, "out", c.out_path);
    }
    if (doc.contains("train")) {
      const json& t = doc.at("train");
      read_if_present(t, "hidden", c.train.hidden);
      read_if_present(t, "epochs", c.train.epochs);
      read_if_present(t, "lr", c.train.lr);
      read_if_present(t, "batch", c.train.batch);
    }
    if (doc.contains("data")) {
      const json& d = doc.at("data");
      if (d.contains("generator")) c.data.generator = parse_generator(d.at("generator").get<std::string>());
      read_if_present(d, "n", c.data.n);
      read_if_present(d, "C", c.data.num_classes);
      read_if_present(d, "size", c.data.size);
      read_if_present(d, "noise", c.data.noise);
      read_if_present(d, "separation", c.data.separation);
      read_if_present(d, "test_size", c.data.test_size);
    }
    if (doc.contains("theory")) {
      const json& t = doc.at("theory");
      read_if_present(t, "n", c.theory_n);
      read_if_present(t, "k", c.theory_k);
      read_if_present(t, "trials", c.theory_trials);
      if (t.contains("norm")) {
        c.theory_norm = t.at("norm").is_null() ? std::nullopt
                                               : std::optional<attack::Norm>(attack::parse_norm(t.at("norm").get<std::string>()));
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid config value: ") + e.what(), "config");
  }
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed config: ") + e.what(), path + ": byte " + std::to_string(e.byte));
  }
  ExperimentConfig config;
  merge_config_json(config, doc);
  return config;
}

std::string git_blob_hash(const std::string& bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + std::string(1, '\0');
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  const bool ok = ctx != nullptr && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &length) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-1 digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < length; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string git_blob_hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open file for hashing: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return git_blob_hash(buffer.str());
}

json report_to_json(const estimator::DatasetReport& report, const ExperimentConfig& config,
                    const std::string& model_hash) {
  json per_point = json::array();
  for (const auto& p : report.per_point) per_point.push_back({{"point", p.point}, {"mean", p.mean}});
  return {
      {"natural_accuracy", report.natural_accuracy},
      {"adversarial_accuracy", report.adversarial_accuracy},
      {"residual_sparsity", report.residual_sparsity ? json(*report.residual_sparsity) : json(nullptr)},
      {"points", report.points},
      {"vulnerable_points", report.vulnerable_points},
      {"evaluated_points", report.evaluated_points},
      {"robust_default", report.robust_default},
      {"per_point", std::move(per_point)},
      {"model_hash", model_hash},
      {"config", config_to_json(config)},
  };
}

std::string sweep_to_csv(const std::vector<estimator::SweepRow>& rows) {
  std::string out = "epsilon,nat_acc,adv_acc,residual_sparsity\n";
  for (const auto& r : rows) {
    out += format_double(r.eps) + "," + format_double(r.natural_accuracy) + "," +
           format_double(r.adversarial_accuracy) + "," + optional_field(r.residual_sparsity) + "\n";
  }
  return out;
}

std::vector<TheoryRow> theory_table(const std::vector<std::size_t>& n_list, const std::vector<double>& k_list,
                                    std::size_t trials, std::uint64_t seed, std::optional<attack::Norm> norm,
                                    std::size_t workers) {
  if (n_list.empty()) throw UsageError("theory needs at least one n");
  if (k_list.empty()) throw UsageError("theory needs at least one k");
  // Sampling cost grows with trials * k * n; larger k rows report closed forms only.
  constexpr double kMaxSampledK = 4096.0;
  std::vector<attack::Norm> norms;
  if (!norm || *norm == attack::Norm::kL2) norms.push_back(attack::Norm::kL2);
  if (!norm || *norm == attack::Norm::kLinf) norms.push_back(attack::Norm::kLinf);

  std::vector<TheoryRow> rows;
  std::size_t row_index = 0;
  for (auto nm : norms) {
    for (std::size_t n : n_list) {
      for (double k : k_list) {
        const theory::TheoryQuery q{n, k};
        TheoryRow row;
        row.norm = nm;
        row.n = n;
        row.k = k;
        const bool sample = trials > 0 && k <= kMaxSampledK && std::floor(k) == k;
        const std::uint64_t row_seed = seed + 0x9e3779b97f4a7c15ULL * ++row_index;
        if (nm == attack::Norm::kL2) {
          row.closed_form = theory::expected_sparsity_l2(q);
          if (!(row.closed_form >= 0.0 && row.closed_form <= geometry::kPi)) {
            throw ConsistencyError("L2 expected sparsity outside [0, pi] at n=" + std::to_string(n));
          }
          if (sample) {
            const auto mc = theory::mc_oracle_l2(q, trials, row_seed, workers);
            row.mc_mean = mc.mean;
            row.mc_stderr = mc.standard_error;
          }
        } else {
          row.closed_form = theory::expected_sparsity_linf(q);
          const auto bounds = theory::linf_bounds(q);
          row.lower = bounds.lower;
          row.upper = bounds.upper;
          // The bounds are only claimed while log2(k) <= n; beyond that the upper one goes negative.
          const bool bounds_apply = std::log2(k) <= static_cast<double>(n);
          if (bounds_apply && !(bounds.lower <= row.closed_form && row.closed_form <= bounds.upper)) {
            throw ConsistencyError("Linf expected sparsity " + format_double(row.closed_form) + " outside bounds [" +
                                   format_double(bounds.lower) + ", " + format_double(bounds.upper) +
                                   "] at n=" + std::to_string(n) + " k=" + format_double(k));
          }
          if (sample) {
            const auto mc = theory::mc_oracle_linf(q, trials, row_seed, workers);
            row.mc_mean = mc.mean;
            row.mc_stderr = mc.standard_error;
          }
        }
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::string theory_to_csv(const std::vector<TheoryRow>& rows) {
  std::string out = "norm,n,k,closed_form,mc_mean,mc_stderr,lower,upper\n";
  for (const auto& r : rows) {
    out += attack::to_string(r.norm) + "," + std::to_string(r.n) + "," + format_double(r.k) + "," +
           format_double(r.closed_form) + "," + optional_field(r.mc_mean) + "," + optional_field(r.mc_stderr) + "," +
           optional_field(r.lower) + "," + optional_field(r.upper) + "\n";
  }
  return out;
}

json theory_to_json(const std::vector<TheoryRow>& rows) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"norm", attack::to_string(r.norm)},
                   {"n", r.n},
                   {"k", r.k},
                   {"closed_form", r.closed_form},
                   {"mc_mean", opt(r.mc_mean)},
                   {"mc_stderr", opt(r.mc_stderr)},
                   {"lower", opt(r.lower)},
                   {"upper", opt(r.upper)}});
  }
  return out;
}

json train_metrics_json(const TrainResult& result, std::optional<double> adv_acc, const ExperimentConfig& config,
                        const std::string& command) {
  const json test_acc = result.test_accuracy ? json(*result.test_accuracy) : json(nullptr);
  const double nat = result.test_accuracy.value_or(result.train_accuracy);
  return {{"command", command},
          {"nat_acc", nat},
          {"adv_acc", adv_acc ? json(*adv_acc) : json(nullptr)},
          {"train_acc", result.train_accuracy},
          {"test_acc", test_acc},
          {"final_loss", result.final_loss},
          {"config", config_to_json(config)}};
}

}  // namespace advsparse::harness
