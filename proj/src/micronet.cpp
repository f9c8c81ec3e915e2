#include "advsparse/micronet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "advsparse/errors.hpp"
#include "quadrature.hpp"
#include "train_loop.hpp"

namespace advsparse {

using json = nlohmann::json;

namespace {

constexpr const char* kModelFormatName = "advsparse.micronet";

Vector relu(const Vector& z) { return z.cwiseMax(0.0); }

// Pre-activations of every layer for input x.
std::vector<Vector> pre_activations(const std::vector<Layer>& layers, const Vector& x) {
  std::vector<Vector> zs;
  zs.reserve(layers.size());
  Vector h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    zs.push_back(layers[l].weights * h + layers[l].bias);
    if (l + 1 < layers.size()) h = relu(zs.back());
  }
  return zs;
}

// Softmax cross-entropy on logits; writes dloss/dlogits into `dz`.
double cross_entropy(const Vector& logits, int y, Vector& dz) {
  const double top = logits.maxCoeff();
  const Vector shifted = (logits.array() - top).matrix();
  const Vector expd = shifted.array().exp().matrix();
  const double total = expd.sum();
  dz = expd / total;
  dz[y] -= 1.0;
  return std::log(total) - shifted[y];
}

}  // namespace

MicroNet::MicroNet(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw InvalidDimension("a MicroNet needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weights.rows() != layer.bias.size() || layer.weights.rows() == 0 || layer.weights.cols() == 0) {
      throw InvalidDimension("layer " + std::to_string(l) + " has inconsistent shape");
    }
    if (l > 0 && layers_[l - 1].weights.rows() != layer.weights.cols()) {
      throw InvalidDimension("layer " + std::to_string(l) + " does not compose with its predecessor");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw NumericError("layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
  input_dim_ = static_cast<std::size_t>(layers_.front().weights.cols());
  num_classes_ = static_cast<std::size_t>(layers_.back().weights.rows());
}

MicroNet MicroNet::random(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t num_classes,
                          Rng& rng) {
  if (input_dim == 0 || num_classes < 2) throw InvalidDimension("need input_dim >= 1 and at least two classes");
  std::vector<std::size_t> widths{input_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(num_classes);
  std::vector<Layer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(widths[l]);
    const auto fan_out = static_cast<Eigen::Index>(widths[l + 1]);
    if (fan_out == 0) throw InvalidDimension("hidden widths must be positive");
    std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    Layer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weights(r, c) = gauss(rng);
    }
    layers.push_back(std::move(layer));
  }
  return MicroNet(std::move(layers));
}

void MicroNet::check_input(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != input_dim_) {
    throw InvalidDimension("input has dimension " + std::to_string(x.size()) + ", model expects " +
                           std::to_string(input_dim_));
  }
  if (!x.allFinite()) throw NumericError("non-finite model input");
}

Vector MicroNet::forward(const Vector& x) const {
  check_input(x);
  Vector h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Vector z = layers_[l].weights * h + layers_[l].bias;
    h = l + 1 < layers_.size() ? relu(z) : std::move(z);
  }
  return h;
}

int MicroNet::predict(const Vector& x) const {
  const Vector logits = forward(x);
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < logits.size(); ++c) {
    if (logits[c] > logits[best]) best = c;
  }
  return static_cast<int>(best);
}

LossAndGrad MicroNet::loss_and_input_grad(const Vector& x, int y) const {
  check_input(x);
  if (y < 0 || static_cast<std::size_t>(y) >= num_classes_) throw DomainError("label out of range");
  const auto zs = pre_activations(layers_, x);
  Vector dz;
  const double loss = cross_entropy(zs.back(), y, dz);
  for (std::size_t l = layers_.size() - 1; l > 0; --l) {
    Vector dh = layers_[l].weights.transpose() * dz;
    dz = (zs[l - 1].array() > 0.0).select(dh, 0.0);
  }
  return {loss, layers_.front().weights.transpose() * dz};
}

double MicroNet::accumulate_param_grads(const Vector& x, int y, ParamGrads& acc) const {
  check_input(x);
  if (y < 0 || static_cast<std::size_t>(y) >= num_classes_) throw DomainError("label out of range");
  const auto zs = pre_activations(layers_, x);
  Vector dz;
  const double loss = cross_entropy(zs.back(), y, dz);
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Vector input = l == 0 ? x : relu(zs[l - 1]);
    acc.layers[l].weights.noalias() += dz * input.transpose();
    acc.layers[l].bias += dz;
    if (l > 0) {
      Vector dh = layers_[l].weights.transpose() * dz;
      dz = (zs[l - 1].array() > 0.0).select(dh, 0.0);
    }
  }
  return loss;
}

ParamGrads MicroNet::zero_grads() const {
  ParamGrads g;
  for (const auto& layer : layers_) {
    g.layers.push_back({Matrix::Zero(layer.weights.rows(), layer.weights.cols()), Vector::Zero(layer.bias.size())});
  }
  return g;
}

void MicroNet::apply_update(const ParamGrads& grads, double lr) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].weights -= lr * grads.layers[l].weights;
    layers_[l].bias -= lr * grads.layers[l].bias;
  }
}

bool MicroNet::operator==(const MicroNet& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& a = layers_[l];
    const auto& b = other.layers_[l];
    if (a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols()) return false;
    if (a.weights != b.weights || a.bias != b.bias) return false;
  }
  return true;
}

double accuracy(const MicroNet& model, const Dataset& data) {
  if (data.empty()) throw DomainError("accuracy of an empty dataset");
  std::size_t correct = 0;
  for (const auto& ex : data.examples) correct += model.predict(ex.x) == ex.y ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

// --- persistence ---------------------------------------------------------------

std::string model_to_json(const MicroNet& model) {
  json layers = json::array();
  for (const auto& layer : model.layers()) {
    json weights = json::array();
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) weights.push_back(layer.weights(r, c));
    }
    json bias = json::array();
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) bias.push_back(layer.bias[r]);
    layers.push_back({{"rows", layer.weights.rows()},
                      {"cols", layer.weights.cols()},
                      {"weights", std::move(weights)},
                      {"bias", std::move(bias)}});
  }
  json doc = {{"format", kModelFormatName},
              {"version", kModelFormatVersion},
              {"input_dim", model.input_dim()},
              {"num_classes", model.num_classes()},
              {"layers", std::move(layers)}};
  return doc.dump(1) + "\n";
}

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(std::string("missing field '") + key + "'", where);
  return obj.at(key);
}

Eigen::Index require_size(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0) {
    throw ParseError(std::string("field '") + key + "' must be a positive integer", where + "/" + key);
  }
  return static_cast<Eigen::Index>(v.get<std::uint64_t>());
}

std::vector<double> require_numbers(const json& obj, const char* key, std::size_t expected, const std::string& where) {
  const json& v = require(obj, key, where);
  const std::string path = where + "/" + key;
  if (!v.is_array()) throw ParseError(std::string("field '") + key + "' must be an array", path);
  if (v.size() != expected) {
    throw ParseError("expected " + std::to_string(expected) + " values, found " + std::to_string(v.size()), path);
  }
  std::vector<double> out;
  out.reserve(expected);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ParseError("non-numeric parameter", path + "/" + std::to_string(i));
    out.push_back(v[i].get<double>());
  }
  return out;
}

}  // namespace

MicroNet model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed model JSON: ") + e.what(), "byte " + std::to_string(e.byte));
  }
  const json& format = require(doc, "format", "");
  if (!format.is_string() || format.get<std::string>() != kModelFormatName) {
    throw ParseError("not a MicroNet model file", "/format");
  }
  const json& version = require(doc, "version", "");
  if (!version.is_number_integer()) throw ParseError("version must be an integer", "/version");
  if (version.get<int>() != kModelFormatVersion) {
    throw UnsupportedVersion("unsupported model format version " + std::to_string(version.get<int>()) +
                             " (supported: " + std::to_string(kModelFormatVersion) + ")");
  }
  const json& layers_doc = require(doc, "layers", "");
  if (!layers_doc.is_array() || layers_doc.empty()) throw ParseError("layers must be a non-empty array", "/layers");
  std::vector<Layer> layers;
  for (std::size_t l = 0; l < layers_doc.size(); ++l) {
    const std::string where = "/layers/" + std::to_string(l);
    const json& entry = layers_doc[l];
    const Eigen::Index rows = require_size(entry, "rows", where);
    const Eigen::Index cols = require_size(entry, "cols", where);
    const auto w = require_numbers(entry, "weights", static_cast<std::size_t>(rows * cols), where);
    const auto b = require_numbers(entry, "bias", static_cast<std::size_t>(rows), where);
    Layer layer{Matrix(rows, cols), Vector(rows)};
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) layer.weights(r, c) = w[static_cast<std::size_t>(r * cols + c)];
      layer.bias[r] = b[static_cast<std::size_t>(r)];
    }
    layers.push_back(std::move(layer));
  }
  MicroNet model(std::move(layers));
  if (require_size(doc, "input_dim", "") != static_cast<Eigen::Index>(model.input_dim()) ||
      require_size(doc, "num_classes", "") != static_cast<Eigen::Index>(model.num_classes())) {
    throw ParseError("header dimensions disagree with layer shapes", "/input_dim");
  }
  return model;
}

void save_model(const MicroNet& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write model file: " + path.string());
  out << model_to_json(model);
}

MicroNet load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open model file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

// --- training --------------------------------------------------------------------

TrainResult train_sgd(const Dataset& train, const TrainConfig& config, const Dataset* holdout) {
  return detail::run_training(train, config, holdout, nullptr);
}

namespace detail {

TrainResult run_training(const Dataset& train, const TrainConfig& config, const Dataset* holdout,
                         const Perturber& perturb) {
  if (train.empty()) throw UsageError("training set is empty");
  if (config.batch == 0) throw UsageError("batch size must be positive");
  if (!(config.lr > 0.0)) throw UsageError("learning rate must be positive");

  Rng init_rng = make_rng(config.seed, Stream::kInit);
  MicroNet model = MicroNet::random(train.n, config.hidden, train.num_classes, init_rng);
  Rng shuffle_rng = make_rng(config.seed, Stream::kShuffle);

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double epoch_loss = 0.0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      ParamGrads grads = model.zero_grads();
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const LabeledExample& ex = train.examples[order[i]];
        if (perturb) {
          batch_loss += model.accumulate_param_grads(ex.x + perturb(model, ex), ex.y, grads);
        } else {
          batch_loss += model.accumulate_param_grads(ex.x, ex.y, grads);
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ": non-finite loss");
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (auto& layer : grads.layers) {
        layer.weights *= scale;
        layer.bias *= scale;
      }
      model.apply_update(grads, config.lr);
      epoch_loss += batch_loss;
    }
    epoch_loss /= static_cast<double>(order.size());
  }
  for (const auto& layer : model.layers()) {
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) throw TrainingError("training produced non-finite weights");
  }

  TrainResult result{model, epoch_loss, accuracy(model, train), std::nullopt};
  if (holdout != nullptr) result.test_accuracy = accuracy(model, *holdout);
  return result;
}

}  // namespace detail

// --- linear oracle -------------------------------------------------------------------

int LinearOracle::predict(const Vector& x) const { return w.dot(x) + b > 0.0 ? 1 : 0; }

MicroNet LinearOracle::to_micronet() const {
  Layer layer{Matrix(2, w.size()), Vector(2)};
  layer.weights.row(0) = -0.5 * w.transpose();
  layer.weights.row(1) = 0.5 * w.transpose();
  layer.bias << -0.5 * b, 0.5 * b;
  return MicroNet({std::move(layer)});
}

std::optional<LinearCap> linear_adversarial_cap(const LinearOracle& oracle, const LabeledExample& ex, double eps) {
  if (oracle.w.size() != ex.x.size()) throw InvalidDimension("oracle and point dimensions differ");
  if (!(eps > 0.0)) throw DomainError("eps must be positive");
  const double wnorm = oracle.w.norm();
  if (!(wnorm > 0.0)) throw DegenerateInput("linear oracle needs w != 0");
  const double side = ex.y == 1 ? 1.0 : -1.0;
  const double margin = side * (oracle.w.dot(ex.x) + oracle.b);
  const double ratio = margin / (eps * wnorm);
  if (ratio >= 1.0) return std::nullopt;
  return LinearCap{geometry::Angle(std::acos(std::clamp(ratio, -1.0, 1.0))),
                   geometry::UnitVector::normalized(-side * oracle.w)};
}

geometry::Angle linear_direction_sparsity(const LinearOracle& oracle, const LabeledExample& ex, double eps,
                                          const geometry::UnitVector& u) {
  const auto cap = linear_adversarial_cap(oracle, ex, eps);
  if (!cap) throw RobustPoint("linear oracle is robust at this point");
  const double theta = geometry::angle_between(u, cap->center).radians();
  return geometry::Angle(std::max(0.0, theta - cap->beta.radians()));
}

double expected_cap_sparsity(double beta, std::size_t n) {
  if (n < 2) throw InvalidDimension("expected cap sparsity needs n >= 2");
  if (!(beta >= 0.0 && beta <= geometry::kPi)) throw DomainError("beta must lie in [0, pi]");
  const double half = 0.5 * static_cast<double>(n - 1);
  // log of the integral of sin^(n-2) over [0, pi].
  const double log_norm = 0.5 * std::log(geometry::kPi) + std::lgamma(half) - std::lgamma(half + 0.5);
  const double power = static_cast<double>(n) - 2.0;
  auto integrand = [&](double theta) {
    const double s = std::sin(theta);
    if (s <= 0.0) return power == 0.0 ? (theta - beta) * std::exp(-log_norm) : 0.0;
    return (theta - beta) * std::exp(power * std::log(s) - log_norm);
  };
  return detail::integrate(integrand, beta, geometry::kPi, 1e-10);
}

geometry::Angle linear_expected_sparsity(const LinearOracle& oracle, const LabeledExample& ex, double eps) {
  const auto cap = linear_adversarial_cap(oracle, ex, eps);
  if (!cap) throw RobustPoint("linear oracle is robust at this point");
  return geometry::Angle(std::clamp(expected_cap_sparsity(cap->beta.radians(), oracle.w.size()), 0.0, geometry::kPi));
}

}  // namespace advsparse
