#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "advsparse/dataset.hpp"
#include "advsparse/errors.hpp"
#include "advsparse/micronet.hpp"
#include "advsparse/rng.hpp"

using namespace advsparse;
using geometry::kPi;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / "advsparse_test_micronet";
  fs::create_directories(dir);
  return dir;
}

Vector finite_difference_grad(const MicroNet& net, const Vector& x, int y, double h) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (net.loss_and_input_grad(xp, y).loss - net.loss_and_input_grad(xm, y).loss) / (2.0 * h);
  }
  return g;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("forward") {
  TEST_CASE("zero weights return the bias and break ties low") {
    Layer l{Matrix::Zero(3, 4), Vector::Zero(3)};
    MicroNet net({l});
    CHECK(net.forward(Vector::Ones(4)) == Vector::Zero(3));
    CHECK(net.predict(Vector::Ones(4)) == 0);
    l.bias << 0.5, 2.0, 2.0;
    MicroNet biased({l});
    CHECK(biased.forward(Vector::Ones(4)) == l.bias);
    CHECK(biased.predict(Vector::Ones(4)) == 1);
  }

  TEST_CASE("single linear layer is exact") {
    Layer l{Matrix(2, 3), Vector(2)};
    l.weights << 1, -2, 0.5, 3, 0, -1;
    l.bias << 0.25, -4;
    Vector x(3);
    x << 2, 1, -2;
    const Vector logits = MicroNet({l}).forward(x);
    CHECK(logits[0] == 1 * 2 - 2 * 1 + 0.5 * -2 + 0.25);
    CHECK(logits[1] == 3 * 2 + 0 - 1 * -2 - 4);
  }

  TEST_CASE("hidden rectifier") {
    Layer a{Matrix(2, 1), Vector::Zero(2)};
    a.weights << 1, -1;
    Layer b{Matrix(2, 2), Vector::Zero(2)};
    b.weights << 1, 0, 0, 1;
    MicroNet net({a, b});
    CHECK(net.forward(Vector::Constant(1, 3.0)) == Vector((Vector(2) << 3, 0).finished()));
    CHECK(net.forward(Vector::Constant(1, -2.0)) == Vector((Vector(2) << 0, 2).finished()));
  }

  TEST_CASE("deterministic and validated") {
    Rng rng = make_rng(3, Stream::kInit);
    const auto net = MicroNet::random(6, {8, 5}, 3, rng);
    Vector x = Vector::LinSpaced(6, -1, 1);
    const Vector a = net.forward(x);
    const Vector b = net.forward(x);
    CHECK(a == b);
    CHECK(a.allFinite());
    x[2] = std::nan("");
    CHECK_THROWS_AS(net.forward(x), NumericError);
    CHECK_THROWS_AS(net.forward(Vector::Zero(5)), InvalidDimension);
    CHECK_THROWS_AS(MicroNet({Layer{Matrix::Zero(2, 3), Vector::Zero(3)}}), InvalidDimension);
    CHECK_THROWS_AS(MicroNet({Layer{Matrix::Zero(4, 3), Vector::Zero(4)}, Layer{Matrix::Zero(2, 3), Vector::Zero(2)}}),
                    InvalidDimension);
    Layer bad{Matrix::Zero(2, 2), Vector::Zero(2)};
    bad.weights(0, 0) = INFINITY;
    CHECK_THROWS_AS(MicroNet({bad}), NumericError);
  }
}

TEST_SUITE("gradients") {
  TEST_CASE("input gradient matches central differences") {
    for (int trial = 0; trial < 20; ++trial) {
      Rng rng = make_rng(1000 + trial, Stream::kInit);
      const std::size_t n = 3 + trial % 7;
      const auto net = MicroNet::random(n, {10, 6}, 2 + trial % 3, rng);
      Rng xr = make_rng(2000 + trial, Stream::kData);
      std::normal_distribution<double> gauss;
      Vector x(n);
      for (auto& v : x) v = gauss(xr);
      const int y = trial % static_cast<int>(net.num_classes());
      const Vector g = net.loss_and_input_grad(x, y).grad;
      const Vector fd = finite_difference_grad(net, x, y, 1e-5);
      const double rel = (g - fd).cwiseAbs().maxCoeff() / std::max(g.cwiseAbs().maxCoeff(), 1e-12);
      CHECK(rel < 1e-4);
    }
  }

  TEST_CASE("parameter gradient matches central differences") {
    Rng rng = make_rng(17, Stream::kInit);
    const auto net = MicroNet::random(4, {5}, 3, rng);
    Vector x(4);
    x << 0.3, -1.2, 0.8, 2.0;
    auto grads = net.zero_grads();
    net.accumulate_param_grads(x, 2, grads);
    const double h = 1e-6;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      const auto& W = net.layers()[l].weights;
      for (Eigen::Index r = 0; r < W.rows(); ++r) {
        for (Eigen::Index c = 0; c < W.cols(); ++c) {
          auto plus = net.layers(), minus = net.layers();
          plus[l].weights(r, c) += h;
          minus[l].weights(r, c) -= h;
          const double fd = (MicroNet(plus).loss_and_input_grad(x, 2).loss -
                             MicroNet(minus).loss_and_input_grad(x, 2).loss) / (2 * h);
          CHECK(std::abs(grads.layers[l].weights(r, c) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
        }
      }
    }
  }

  TEST_CASE("binary linear model gradient is parallel to w") {
    Vector w(5);
    w << 1, -2, 0.5, 3, -1;
    const LinearOracle oracle{w, 0.3};
    const auto net = oracle.to_micronet();
    Vector x = Vector::LinSpaced(5, -0.5, 0.7);
    for (int y : {0, 1}) {
      const Vector g = net.loss_and_input_grad(x, y).grad;
      const double cos = g.dot(w) / (g.norm() * w.norm());
      // The loss grows when moving away from class y: toward -w for y = 1, +w for y = 0.
      CHECK(std::abs(std::abs(cos) - 1.0) <= 1e-12);
      CHECK((y == 1 ? cos < 0 : cos > 0));
    }
  }

  TEST_CASE("confident logits have vanishing loss") {
    Layer l{Matrix::Zero(2, 1), Vector(2)};
    l.bias << 0.0, 800.0;
    const auto r = MicroNet({l}).loss_and_input_grad(Vector::Zero(1), 1);
    CHECK(r.loss >= 0.0);
    CHECK(r.loss < 1e-300);
    const auto wrong = MicroNet({l}).loss_and_input_grad(Vector::Zero(1), 0);
    CHECK(wrong.loss == doctest::Approx(800.0));
    CHECK_THROWS_AS(MicroNet({l}).loss_and_input_grad(Vector::Zero(1), 2), DomainError);
  }
}

TEST_SUITE("training") {
  TEST_CASE("separable blobs reach 95% test accuracy") {
    SyntheticDatasetSpec spec;
    spec.n = 20;
    spec.size = 2500;
    spec.seed = 4;
    auto [train, test] = split_dataset(generate_dataset(spec), 500);
    REQUIRE(train.size() == 2000);
    TrainConfig cfg;
    cfg.seed = 1;
    const auto result = train_sgd(train, cfg, &test);
    REQUIRE(result.test_accuracy.has_value());
    CHECK(*result.test_accuracy >= 0.95);
    CHECK(result.train_accuracy >= 0.95);
  }

  TEST_CASE("zero epochs return the initialization") {
    SyntheticDatasetSpec spec;
    spec.size = 50;
    const auto data = generate_dataset(spec);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 9;
    cfg.hidden = {7};
    Rng rng = make_rng(9, Stream::kInit);
    CHECK(train_sgd(data, cfg).model == MicroNet::random(data.n, {7}, 2, rng));
  }

  TEST_CASE("same seed, same parameters") {
    SyntheticDatasetSpec spec;
    spec.size = 200;
    spec.generator = Generator::kXorGrid;
    const auto data = generate_dataset(spec);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 5;
    const auto a = train_sgd(data, cfg);
    const auto b = train_sgd(data, cfg);
    CHECK(a.model == b.model);
    CHECK(a.final_loss == b.final_loss);
    cfg.seed = 6;
    CHECK(!(train_sgd(data, cfg).model == a.model));
  }

  TEST_CASE("divergence and bad configs") {
    SyntheticDatasetSpec spec;
    spec.size = 100;
    spec.separation = 1e150;
    const auto data = generate_dataset(spec);
    TrainConfig cfg;
    cfg.lr = 1e10;
    CHECK_THROWS_AS(train_sgd(data, cfg), TrainingError);
    cfg.lr = 0.05;
    cfg.batch = 0;
    CHECK_THROWS_AS(train_sgd(data, cfg), UsageError);
    CHECK_THROWS_AS(train_sgd(Dataset{}, TrainConfig{}), UsageError);
  }
}

TEST_SUITE("persistence") {
  TEST_CASE("save and load is bit-exact") {
    Rng rng = make_rng(12, Stream::kInit);
    const auto net = MicroNet::random(9, {13, 4}, 3, rng);
    const auto path = scratch_dir() / "model.json";
    save_model(net, path);
    const auto back = load_model(path);
    CHECK(back == net);
    const Vector x = Vector::LinSpaced(9, -3, 2);
    CHECK(back.forward(x) == net.forward(x));
    CHECK(model_to_json(back) == model_to_json(net));
  }

  TEST_CASE("truncated file is a parse error with a location") {
    Rng rng = make_rng(13, Stream::kInit);
    const std::string text = model_to_json(MicroNet::random(3, {4}, 2, rng));
    const auto path = scratch_dir() / "truncated.json";
    {
      std::ofstream out(path, std::ios::binary);
      out << text.substr(0, text.size() / 2);
    }
    try {
      load_model(path);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(!e.location().empty());
    }
  }

  TEST_CASE("structural errors name the offending field") {
    Rng rng = make_rng(14, Stream::kInit);
    auto doc = nlohmann::json::parse(model_to_json(MicroNet::random(3, {4}, 2, rng)));
    auto bad = doc;
    bad["layers"][0]["weights"].erase(0);
    try {
      model_from_json(bad.dump());
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.location() == "/layers/0/weights");
    }
    bad = doc;
    bad["layers"][1]["bias"][0] = "x";
    CHECK_THROWS_AS(model_from_json(bad.dump()), ParseError);
    bad = doc;
    bad["format"] = "something else";
    CHECK_THROWS_AS(model_from_json(bad.dump()), ParseError);
  }

  TEST_CASE("version mismatch is reported explicitly") {
    Rng rng = make_rng(15, Stream::kInit);
    auto doc = nlohmann::json::parse(model_to_json(MicroNet::random(3, {4}, 2, rng)));
    doc["version"] = kModelFormatVersion + 1;
    CHECK_THROWS_AS(model_from_json(doc.dump()), UnsupportedVersion);
  }

  TEST_CASE("model file stays readable") {
    Rng rng = make_rng(16, Stream::kInit);
    const auto net = MicroNet::random(2, {}, 2, rng);
    const auto doc = nlohmann::json::parse(model_to_json(net));
    CHECK(doc["format"] == "advsparse.micronet");
    CHECK(doc["version"] == 1);
    CHECK(doc["input_dim"] == 2);
    CHECK(doc["num_classes"] == 2);
    CHECK(doc["layers"][0]["rows"] == 2);
    CHECK(doc["layers"][0]["cols"] == 2);
    CHECK(doc["layers"][0]["weights"][1] == net.layers()[0].weights(0, 1));
  }
}

TEST_SUITE("linear oracle") {
  const Vector kW = (Vector(4) << 2.0, -1.0, 0.5, 1.0).finished();

  // Point of class 1 whose signed margin is `m` (w.x + b = m).
  LabeledExample at_margin(double m, int y = 1) {
    return {Vector(kW * (m - 0.25) / kW.squaredNorm()), y};
  }

  TEST_CASE("micronet equivalent predicts the same class") {
    const LinearOracle oracle{kW, 0.25};
    const auto net = oracle.to_micronet();
    Rng rng = make_rng(1, Stream::kData);
    std::normal_distribution<double> gauss;
    for (int i = 0; i < 1000; ++i) {
      Vector x(4);
      for (auto& v : x) v = gauss(rng);
      CHECK(net.predict(x) == oracle.predict(x));
      const Vector logits = net.forward(x);
      CHECK(logits[1] - logits[0] == doctest::Approx(kW.dot(x) + 0.25));
    }
  }

  TEST_CASE("cap examples") {
    const LinearOracle oracle{kW, 0.25};
    const double eps = 0.7;
    const double scale = eps * kW.norm();
    auto on_boundary = linear_adversarial_cap(oracle, at_margin(0.0), eps);
    REQUIRE(on_boundary);
    CHECK(on_boundary->beta.radians() == doctest::Approx(kPi / 2));
    CHECK((on_boundary->center.coords() + kW.normalized()).norm() <= 1e-12);
    CHECK(!linear_adversarial_cap(oracle, at_margin(scale), eps));
    CHECK(!linear_adversarial_cap(oracle, at_margin(2 * scale), eps));
    auto third = linear_adversarial_cap(oracle, at_margin(scale * 0.5), eps);
    REQUIRE(third);
    CHECK(third->beta.radians() == doctest::Approx(kPi / 3).epsilon(1e-12));
    // Class 0 points are attacked along +w.
    auto other = linear_adversarial_cap(oracle, at_margin(-scale * 0.5, 0), eps);
    REQUIRE(other);
    CHECK(other->beta.radians() == doctest::Approx(kPi / 3).epsilon(1e-12));
    CHECK((other->center.coords() - kW.normalized()).norm() <= 1e-12);
    // Already misclassified: more than half of the sphere keeps it wrong.
    auto wrong = linear_adversarial_cap(oracle, at_margin(-scale * 0.5), eps);
    REQUIRE(wrong);
    CHECK(wrong->beta.radians() == doctest::Approx(2 * kPi / 3).epsilon(1e-12));
  }

  TEST_CASE("cap size matches rejection sampling") {
    const LinearOracle oracle{kW, 0.25};
    const double eps = 0.7;
    const auto ex = at_margin(eps * kW.norm() * 0.5);
    Rng rng = make_rng(8, Stream::kMonteCarlo);
    const std::size_t samples = 200000;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector d = geometry::sample_uniform_sphere(4, rng).coords();
      if (oracle.predict(ex.x + eps * d) != ex.y) ++hits;
    }
    const double p = static_cast<double>(hits) / samples;
    const double expected = geometry::cap_fraction(4, geometry::Angle(kPi / 3));
    CHECK(std::abs(p - expected) <= 3.0 * std::sqrt(expected * (1 - expected) / samples));
  }

  TEST_CASE("cap membership is exact") {
    const LinearOracle oracle{kW, 0.25};
    Rng rng = make_rng(9, Stream::kMonteCarlo);
    std::size_t checked = 0;
    for (double frac : {-0.8, -0.2, 0.0, 0.3, 0.9}) {
      const double eps = 1.3;
      const auto ex = at_margin(frac * eps * kW.norm());
      const auto cap = linear_adversarial_cap(oracle, ex, eps);
      REQUIRE(cap);
      for (int i = 0; i < 20000; ++i) {
        const auto d = geometry::sample_uniform_sphere(4, rng);
        const double angle = geometry::angle_between(d, cap->center).radians();
        if (std::abs(angle - cap->beta.radians()) < 1e-9) continue;
        CHECK((oracle.predict(ex.x + eps * d.coords()) != ex.y) == (angle <= cap->beta.radians()));
        ++checked;
      }
    }
    CHECK(checked >= 99000);
  }

  TEST_CASE("direction sparsity geometry") {
    const LinearOracle oracle{kW, 0.25};
    const double eps = 0.7;
    const auto ex = at_margin(eps * kW.norm() * 0.5);
    const auto cap = *linear_adversarial_cap(oracle, ex, eps);
    const double beta = cap.beta.radians();
    CHECK(linear_direction_sparsity(oracle, ex, eps, cap.center).radians() == 0.0);
    CHECK(linear_direction_sparsity(oracle, ex, eps, -cap.center).radians() == doctest::Approx(kPi - beta));
    Vector perp(4);
    perp << 1, 2, 0, 0;  // orthogonal to w
    CHECK(linear_direction_sparsity(oracle, ex, eps, geometry::UnitVector::normalized(perp)).radians() ==
          doctest::Approx(kPi / 2 - beta));
    CHECK_THROWS_AS(linear_direction_sparsity(oracle, at_margin(2 * eps * kW.norm()), eps, cap.center), RobustPoint);
  }

  TEST_CASE("expected cap sparsity") {
    // n = 3: the mean of max(0, theta - beta) is (pi - beta - sin beta) / 2.
    for (double beta : {0.0, 0.4, kPi / 2, 2.5, kPi}) {
      CHECK(expected_cap_sparsity(beta, 3) == doctest::Approx((kPi - beta - std::sin(beta)) / 2).epsilon(1e-10));
    }
    CHECK(expected_cap_sparsity(kPi / 2, 3) == doctest::Approx((kPi - 2) / 4).epsilon(1e-10));
    // beta = 0: the mean angle to a fixed axis, pi / 2 in any dimension.
    for (std::size_t n : {2u, 5u, 50u, 2000u}) CHECK(expected_cap_sparsity(0.0, n) == doctest::Approx(kPi / 2));
    CHECK(expected_cap_sparsity(kPi - 1e-9, 10) < 1e-12);
    CHECK(expected_cap_sparsity(kPi, 10) == 0.0);
  }

  TEST_CASE("expected sparsity matches sampled directions") {
    const LinearOracle oracle{kW, 0.25};
    const double eps = 0.9;
    const auto ex = at_margin(0.3 * eps * kW.norm());
    Rng rng = make_rng(10, Stream::kMonteCarlo);
    const std::size_t samples = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
      const double v = linear_direction_sparsity(oracle, ex, eps, geometry::sample_uniform_sphere(4, rng)).radians();
      sum += v;
      sum_sq += v * v;
    }
    const double mean = sum / samples;
    const double se = std::sqrt((sum_sq / samples - mean * mean) / samples);
    CHECK(std::abs(linear_expected_sparsity(oracle, ex, eps).radians() - mean) <= 3.0 * se);
  }
}
