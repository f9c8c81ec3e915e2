#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "advsparse/errors.hpp"
#include "advsparse/estimator.hpp"
#include "advsparse/rng.hpp"

using namespace advsparse;
using namespace advsparse::estimator;
using attack::Norm;
using attack::ThreatModel;
using geometry::kPi;

namespace {

LinearOracle make_oracle(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::kInit);
  std::normal_distribution<double> gauss;
  Vector w(static_cast<Eigen::Index>(n));
  for (auto& v : w) v = gauss(rng);
  return {w, 0.3};
}

LabeledExample at_margin(const LinearOracle& o, double m, int y = 1) {
  return {Vector(o.w * (m - o.b) / o.w.squaredNorm()), y};
}

// Normalized ascent with a step longer than any radius used here: on a linear
// model the first step then lands on the best point of the cap, which makes
// the attack an exact predicate.
EstimatorConfig normalized_config(std::size_t k = 10, std::size_t n_dirs = 100) {
  EstimatorConfig c;
  c.search_steps = k;
  c.directions = n_dirs;
  c.attack.ascent = attack::Ascent::kNormalized;
  c.attack.step_size = 10.0;
  c.seed = 5;
  return c;
}

// Every successful probe lies at or above the final upper bound, every failed
// one at or below the final lower bound.
void check_bracket(const DirectionEstimate& est) {
  for (const auto& p : est.trace) {
    if (p.success) CHECK(p.probe >= est.upper);
    else CHECK(p.probe <= est.lower);
  }
}

}  // namespace

TEST_SUITE("l2 direction search") {
  TEST_CASE("final bracket has width pi 2^-K and contains the analytic threshold") {
    for (std::size_t n : {3u, 8u, 20u}) {
      const auto oracle = make_oracle(n, n);
      const auto net = oracle.to_micronet();
      Rng rng = make_rng(n, Stream::kDirections);
      for (std::size_t k : {1u, 4u, 10u, 16u}) {
        for (double frac : {0.02, 0.4, 0.9}) {
          const double eps = 1.1;
          const auto ex = at_margin(oracle, frac * eps * oracle.w.norm());
          const auto u = geometry::sample_uniform_sphere(n, rng);
          const auto est = direction_sparsity_l2(net, ex, u, {Norm::kL2, eps}, normalized_config(k));
          REQUIRE(est);
          CHECK(est->trace.size() == k);
          CHECK(std::abs((est->upper - est->lower) - kPi * std::ldexp(1.0, -static_cast<int>(k))) <= 1e-15);
          CHECK(est->value == est->trace.back().probe);
          check_bracket(*est);
          const double truth = linear_direction_sparsity(oracle, ex, eps, u).radians();
          CHECK(std::abs(est->value - truth) <= kPi * std::ldexp(1.0, -static_cast<int>(k)) + 1e-6);
          CHECK(est->lower <= truth + 1e-6);
          CHECK(truth <= est->upper + 1e-6);
        }
      }
    }
  }

  TEST_CASE("misclassified points and the step length") {
    const auto oracle = make_oracle(8, 2);
    const double eps = 1.0;
    const auto ex = at_margin(oracle, -0.3 * eps * oracle.w.norm());
    const auto cap = *linear_adversarial_cap(oracle, ex, eps);
    const auto net = oracle.to_micronet();
    // A long step reaches the sphere at once and reproduces the analytic value.
    const auto full = direction_sparsity_l2(net, ex, -cap.center, {Norm::kL2, eps}, normalized_config());
    REQUIRE(full);
    CHECK(std::abs(full->value - (kPi - cap.beta.radians())) <= kPi * std::ldexp(1.0, -10) + 1e-6);
    // With the default step, ascent pointing away from the cap keeps |delta|
    // short, and the already-wrong point stays wrong at the smallest angle.
    auto cfg = normalized_config();
    cfg.attack.step_size.reset();
    const auto short_steps = direction_sparsity_l2(net, ex, -cap.center, {Norm::kL2, eps}, cfg);
    REQUIRE(short_steps);
    check_bracket(*short_steps);
    CHECK(short_steps->value <= kPi * std::ldexp(1.0, -10));
  }

  TEST_CASE("aligned direction gives the first bracket") {
    const auto oracle = make_oracle(10, 1);
    const double eps = 1.0;
    const auto ex = at_margin(oracle, 0.5 * eps * oracle.w.norm());
    const auto cap = *linear_adversarial_cap(oracle, ex, eps);
    const auto est = direction_sparsity_l2(oracle.to_micronet(), ex, cap.center, {Norm::kL2, eps}, normalized_config());
    REQUIRE(est);
    CHECK(est->value <= kPi * std::ldexp(1.0, -10));
    CHECK(est->lower == 0.0);
  }

  TEST_CASE("robust point has no direction sparsity") {
    const auto oracle = make_oracle(5, 2);
    const auto ex = at_margin(oracle, 2.0 * oracle.w.norm());
    CHECK(!direction_sparsity_l2(oracle.to_micronet(), ex, geometry::UnitVector(Vector::Unit(5, 0)),
                                 {Norm::kL2, 1.0}, normalized_config()));
  }

  TEST_CASE("warm start keeps the bracket contract") {
    Rng init = make_rng(3, Stream::kInit);
    const auto net = MicroNet::random(6, {16}, 3, init);
    Rng rng = make_rng(3, Stream::kDirections);
    auto cfg = normalized_config(8);
    cfg.warm_start = true;
    for (int i = 0; i < 10; ++i) {
      LabeledExample ex{geometry::sample_uniform_sphere(6, rng).coords(), i % 3};
      const auto u = geometry::sample_uniform_sphere(6, rng);
      const auto est = search_cap_angle(net, ex, u, {Norm::kL2, 2.0}, cfg);
      check_bracket(est);
      CHECK(std::abs((est.upper - est.lower) - kPi / 256) <= 1e-15);
    }
  }

  TEST_CASE("config validation") {
    auto cfg = normalized_config();
    cfg.search_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg = normalized_config();
    cfg.directions = 0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
  }
}

TEST_SUITE("linf direction search") {
  TEST_CASE("vertex already adversarial gives zero") {
    const auto oracle = make_oracle(6, 4);
    const double eps = 0.5;
    // Signs along -w move the class 1 point across the boundary with every pixel pinned.
    std::vector<int> signs(6);
    for (int i = 0; i < 6; ++i) signs[i] = oracle.w[i] >= 0 ? -1 : 1;
    const geometry::VertexSigns u(signs);
    const geometry::PixelPermutation sigma({3, 1, 4, 0, 5, 2});
    const auto ex = at_margin(oracle, 0.5 * eps * oracle.w.lpNorm<1>());
    const auto est = direction_sparsity_linf(oracle.to_micronet(), ex, u, sigma, {Norm::kLinf, eps}, EstimatorConfig{});
    REQUIRE(est);
    CHECK(est->value == 0.0);
    check_bracket(*est);
  }

  TEST_CASE("one-dimensional input") {
    const LinearOracle oracle{Vector::Constant(1, 1.0), 0.0};
    const auto net = oracle.to_micronet();
    const geometry::PixelPermutation sigma({0});
    const LabeledExample ex{Vector::Constant(1, 0.2), 1};
    const ThreatModel threat{Norm::kLinf, 0.5};
    const auto toward = direction_sparsity_linf(net, ex, geometry::VertexSigns({-1}), sigma, threat, EstimatorConfig{});
    const auto away = direction_sparsity_linf(net, ex, geometry::VertexSigns({1}), sigma, threat, EstimatorConfig{});
    REQUIRE(toward);
    REQUIRE(away);
    CHECK(toward->value == 0.0);
    CHECK(away->value == 1.0);
    CHECK(toward->trace.size() == 1);
    CHECK(away->trace.size() == 1);
  }

  TEST_CASE("matches exhaustive minimal pixel count on linear models") {
    std::size_t compared = 0;
    for (std::size_t n = 2; n <= 12; ++n) {
      const auto oracle = make_oracle(n, 100 + n);
      const auto net = oracle.to_micronet();
      Rng rng = make_rng(n, Stream::kDirections, 7);
      const double eps = 0.4;
      for (double frac : {-0.2, 0.1, 0.5, 0.8, 0.97}) {
        const auto ex = at_margin(oracle, frac * eps * oracle.w.lpNorm<1>());
        for (int d = 0; d < 5; ++d) {
          const auto [u, sigma] = geometry::sample_vertex_and_permutation(n, rng);
          const ThreatModel threat{Norm::kLinf, eps};
          const auto est = direction_sparsity_linf(net, ex, u, sigma, threat, EstimatorConfig{});
          REQUIRE(est);
          std::size_t minimal = n;
          for (std::size_t m = 0; m <= n; ++m) {
            if (attack::pgd_vertex(net, ex, u, sigma, m, threat, attack::AttackConfig{}).success) {
              minimal = m;
              break;
            }
          }
          CHECK(est->value == static_cast<double>(minimal));
          check_bracket(*est);
          ++compared;
        }
      }
    }
    CHECK(compared == 11 * 5 * 5);
  }
}

TEST_SUITE("point sparsity") {
  TEST_CASE("robust points get the default value") {
    const auto oracle = make_oracle(7, 5);
    const auto ex = at_margin(oracle, 3.0 * oracle.w.lpNorm<1>());
    const auto l2 = point_sparsity(oracle.to_micronet(), ex, {Norm::kL2, 1.0}, normalized_config());
    CHECK(l2.robust);
    CHECK(l2.mean == kPi / 2);
    const auto linf = point_sparsity(oracle.to_micronet(), ex, {Norm::kLinf, 1.0}, EstimatorConfig{});
    CHECK(linf.robust);
    CHECK(linf.mean == 7.0);
    CHECK(robust_default({Norm::kLinf, 1.0}, 7) == 7.0);
  }

  TEST_CASE("single direction equals the direction search") {
    const auto oracle = make_oracle(6, 6);
    const auto net = oracle.to_micronet();
    const auto ex = at_margin(oracle, 0.5);
    auto cfg = normalized_config(10, 1);
    const auto point = point_sparsity(net, ex, {Norm::kL2, 1.0}, cfg, 42);
    Rng rng = make_rng(cfg.seed, Stream::kDirections, 42, 0);
    const auto u = geometry::sample_uniform_sphere(6, rng);
    REQUIRE(point.records.size() == 1);
    CHECK(point.mean == direction_sparsity_l2(net, ex, u, {Norm::kL2, 1.0}, cfg)->value);
    CHECK(point.records[0].point == 42);

    cfg.attack = attack::AttackConfig{};
    const auto pl = point_sparsity(net, ex, {Norm::kLinf, 0.3}, cfg, 42);
    Rng rng2 = make_rng(cfg.seed, Stream::kDirections, 42, 0);
    const auto [v, sigma] = geometry::sample_vertex_and_permutation(6, rng2);
    CHECK(pl.mean == direction_sparsity_linf(net, ex, v, sigma, {Norm::kLinf, 0.3}, cfg)->value);
  }

  TEST_CASE("linear model mean matches the analytic expectation") {
    const auto oracle = make_oracle(20, 7);
    const double eps = 1.0;
    const auto ex = at_margin(oracle, 0.6 * eps * oracle.w.norm());
    const auto point = point_sparsity(oracle.to_micronet(), ex, {Norm::kL2, eps}, normalized_config());
    CHECK(!point.robust);
    CHECK(std::abs(point.mean - linear_expected_sparsity(oracle, ex, eps).radians()) <= 0.05);
    for (const auto& r : point.records) {
      CHECK(r.value >= 0.0);
      CHECK(r.value <= kPi);
    }
  }

  TEST_CASE("independent of the worker count") {
    Rng init = make_rng(8, Stream::kInit);
    const auto net = MicroNet::random(5, {10}, 2, init);
    const LabeledExample ex{Vector::LinSpaced(5, -0.4, 0.4), 0};
    auto cfg = normalized_config(6, 17);
    for (auto norm : {Norm::kL2, Norm::kLinf}) {
      cfg.workers = 1;
      const auto a = point_sparsity(net, ex, {norm, 3.0}, cfg);
      cfg.workers = 4;
      const auto b = point_sparsity(net, ex, {norm, 3.0}, cfg);
      CHECK(!a.robust);
      CHECK(a.mean == b.mean);
      for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(a.records[i].value == b.records[i].value);
    }
  }
}

TEST_SUITE("dataset evaluation") {
  Dataset linear_dataset(const LinearOracle& oracle, const std::vector<double>& margins) {
    Dataset d;
    d.n = static_cast<std::size_t>(oracle.w.size());
    d.num_classes = 2;
    for (double m : margins) d.examples.push_back(at_margin(oracle, m));
    return d;
  }

  TEST_CASE("half robust, half vulnerable") {
    const auto oracle = make_oracle(8, 9);
    const double eps = 1.0;
    const double scale = eps * oracle.w.norm();
    std::vector<double> margins;
    for (int i = 0; i < 100; ++i) margins.push_back(i % 2 == 0 ? 2.0 * scale : (0.2 + 0.006 * i) * scale);
    const auto data = linear_dataset(oracle, margins);
    auto cfg = normalized_config(8, 20);
    const auto report = dataset_eval(oracle.to_micronet(), data, {Norm::kL2, eps}, cfg);
    CHECK(report.natural_accuracy == 1.0);
    CHECK(report.adversarial_accuracy == 0.5);
    CHECK(report.vulnerable_points == 50);
    CHECK(report.evaluated_points == 50);
    REQUIRE(report.residual_sparsity);
    double total = 0.0;
    for (const auto& p : report.per_point) {
      CHECK(p.point % 2 == 1);
      total += p.mean;
    }
    CHECK(*report.residual_sparsity == doctest::Approx(total / 50));
    double analytic = 0.0;
    for (int i = 1; i < 100; i += 2) analytic += linear_expected_sparsity(oracle, data.examples[i], eps).radians();
    CHECK(std::abs(*report.residual_sparsity - analytic / 50) <= 0.05);

    cfg.max_points = 7;
    const auto capped = dataset_eval(oracle.to_micronet(), data, {Norm::kL2, eps}, cfg);
    CHECK(capped.evaluated_points == 7);
    CHECK(capped.per_point.back().point == 13);
    CHECK(capped.adversarial_accuracy == 0.5);
  }

  TEST_CASE("robust everywhere") {
    const auto oracle = make_oracle(4, 10);
    const auto data = linear_dataset(oracle, std::vector<double>(10, 5.0 * oracle.w.norm()));
    const auto report = dataset_eval(oracle.to_micronet(), data, {Norm::kL2, 1.0}, normalized_config());
    CHECK(report.adversarial_accuracy == 1.0);
    CHECK(!report.residual_sparsity);
    CHECK(report.evaluated_points == 0);
    CHECK(report.robust_default == kPi / 2);
  }

  TEST_CASE("constant model has class-prior accuracy") {
    Layer l{Matrix::Zero(2, 3), Vector(2)};
    l.bias << 1.0, 0.0;
    const MicroNet constant({l});
    Dataset d;
    d.n = 3;
    d.num_classes = 2;
    for (int i = 0; i < 40; ++i) d.examples.push_back({Vector::Constant(3, i), i % 4 == 0 ? 0 : 1});
    const auto report = dataset_eval(constant, d, {Norm::kL2, 1.0}, normalized_config(4, 3));
    CHECK(report.natural_accuracy == 0.25);
    CHECK(report.adversarial_accuracy == 0.25);
    // Misclassified points are broken by every direction at the smallest angle.
    REQUIRE(report.residual_sparsity);
    CHECK(*report.residual_sparsity >= 0.0);
    CHECK(*report.residual_sparsity <= kPi);
  }

  TEST_CASE("empty dataset") {
    CHECK_THROWS_AS(dataset_eval(make_oracle(3, 1).to_micronet(), Dataset{}, {Norm::kL2, 1.0}, EstimatorConfig{}),
                    UsageError);
  }
}

TEST_SUITE("epsilon sweep") {
  TEST_CASE("linear model sparsity decreases with the radius") {
    const auto oracle = make_oracle(10, 11);
    Dataset d;
    d.n = 10;
    d.num_classes = 2;
    d.examples.push_back(at_margin(oracle, 0.5));
    const std::vector<double> eps = {0.6, 0.8, 1.2, 2.0, 4.0};
    const auto rows = epsilon_sweep(oracle.to_micronet(), d, eps, Norm::kL2, normalized_config(16, 30));
    REQUIRE(rows.size() == eps.size());
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(*rows[i].residual_sparsity < *rows[i - 1].residual_sparsity);
      CHECK(rows[i].eps == eps[i]);
    }
  }

  TEST_CASE("radius below every margin keeps natural accuracy") {
    const auto oracle = make_oracle(5, 12);
    Dataset d;
    d.n = 5;
    d.num_classes = 2;
    for (double m : {0.4, 0.9, -0.3, 1.5}) d.examples.push_back(at_margin(oracle, m));
    // Smallest |margin| / |w| over the data.
    const double limit = 0.3 / oracle.w.norm();
    const auto rows = epsilon_sweep(oracle.to_micronet(), d, {0.25 * limit, 0.9 * limit}, Norm::kL2, normalized_config());
    for (const auto& r : rows) CHECK(r.adversarial_accuracy == r.natural_accuracy);
  }

  TEST_CASE("radius list must increase") {
    const auto oracle = make_oracle(3, 13);
    Dataset d;
    d.n = 3;
    d.num_classes = 2;
    d.examples.push_back(at_margin(oracle, 0.5));
    CHECK_THROWS_AS(epsilon_sweep(oracle.to_micronet(), d, {0.5, 0.5}, Norm::kL2, EstimatorConfig{}), UsageError);
    CHECK_THROWS_AS(epsilon_sweep(oracle.to_micronet(), d, {}, Norm::kL2, EstimatorConfig{}), UsageError);
  }
}
