#include <pybind11/eigen.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "advsparse/attack.hpp"
#include "advsparse/dataset.hpp"
#include "advsparse/errors.hpp"
#include "advsparse/estimator.hpp"
#include "advsparse/geometry.hpp"
#include "advsparse/harness.hpp"
#include "advsparse/micronet.hpp"
#include "advsparse/rng.hpp"
#include "advsparse/special.hpp"
#include "advsparse/theory.hpp"

namespace py = pybind11;
using namespace advsparse;
using py::arg;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Release = py::call_guard<py::gil_scoped_release>;

RowMatrix features(const Dataset& d) {
  RowMatrix x(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.n));
  for (std::size_t i = 0; i < d.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = d.examples[i].x.transpose();
  return x;
}

std::vector<int> labels(const Dataset& d) {
  std::vector<int> y;
  y.reserve(d.size());
  for (const auto& ex : d.examples) y.push_back(ex.y);
  return y;
}

Dataset make_dataset(const RowMatrix& x, const std::vector<int>& y, std::size_t num_classes) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw UsageError("X and y have different lengths");
  Dataset d;
  d.n = static_cast<std::size_t>(x.cols());
  for (int label : y) {
    if (label < 0) throw UsageError("labels must be non-negative");
    num_classes = std::max(num_classes, static_cast<std::size_t>(label) + 1);
  }
  d.num_classes = num_classes;
  for (Eigen::Index i = 0; i < x.rows(); ++i) d.examples.push_back({Vector(x.row(i).transpose()), y[static_cast<std::size_t>(i)]});
  return d;
}

attack::ThreatModel threat(const std::string& norm, double eps) { return {attack::parse_norm(norm), eps}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adversarial sparsity: geometry, theory, small networks, attacks and estimators";

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<RobustPoint>(m, "RobustPoint", PyExc_RuntimeError);

  // geometry and theory
  m.def("incomplete_beta", &special::regularized_incomplete_beta, arg("x"), arg("a"), arg("b"));
  m.def(
      "cap_fraction",
      [](std::size_t n, double alpha, bool literal) {
        return geometry::cap_fraction(n, geometry::Angle(alpha),
                                      literal ? geometry::CapConvention::kLiteral : geometry::CapConvention::kCorrected);
      },
      arg("n"), arg("alpha"), arg("literal") = false);
  m.def(
      "angle_between", [](const Vector& a, const Vector& b) { return geometry::angle_between(a, b).radians(); },
      arg("a"), arg("b"));
  m.def(
      "project_to_cap",
      [](const Vector& delta, const Vector& u, double alpha, double eps) {
        return geometry::project_to_cap(delta, geometry::UnitVector::normalized(u), geometry::Angle(alpha), eps);
      },
      arg("delta"), arg("u"), arg("alpha"), arg("eps"), "u is normalized first.");
  m.def(
      "sample_sphere",
      [](std::size_t n, std::uint64_t seed) {
        Rng rng = make_rng(seed, Stream::kDirections);
        return geometry::sample_uniform_sphere(n, rng).coords();
      },
      arg("n"), arg("seed"));
  m.def(
      "expected_sparsity_l2", [](std::size_t n, double k) { return theory::expected_sparsity_l2({n, k}); }, arg("n"),
      arg("k"));
  m.def(
      "expected_sparsity_linf", [](std::size_t n, double k) { return theory::expected_sparsity_linf({n, k}); },
      arg("n"), arg("k"));
  m.def(
      "linf_bounds",
      [](std::size_t n, double k) {
        const auto b = theory::linf_bounds({n, k});
        return std::make_pair(b.lower, b.upper);
      },
      arg("n"), arg("k"));
  m.def(
      "mc_oracle",
      [](const std::string& norm, std::size_t n, double k, std::size_t trials, std::uint64_t seed,
         std::size_t workers) {
        const auto est = attack::parse_norm(norm) == attack::Norm::kL2
                             ? theory::mc_oracle_l2({n, k}, trials, seed, workers)
                             : theory::mc_oracle_linf({n, k}, trials, seed, workers);
        return std::make_pair(est.mean, est.standard_error);
      },
      arg("norm"), arg("n"), arg("k"), arg("trials"), arg("seed"), arg("workers") = 1, Release(),
      "Monte-Carlo mean and standard error.");

  // datasets
  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), arg("X"), arg("y"), arg("num_classes") = 0)
      .def_readonly("n", &Dataset::n)
      .def_readonly("num_classes", &Dataset::num_classes)
      .def_readonly("generator", &Dataset::generator)
      .def_readonly("seed", &Dataset::seed)
      .def_property_readonly("X", &features)
      .def_property_readonly("y", &labels)
      .def("__len__", &Dataset::size)
      .def("save", [](const Dataset& d, const std::filesystem::path& p) { save_dataset(d, p); }, arg("path"));
  m.def(
      "generate_dataset",
      [](const std::string& generator, std::size_t n, std::size_t num_classes, std::size_t size, double noise,
         double separation, std::uint64_t seed) {
        SyntheticDatasetSpec s;
        s.generator = parse_generator(generator);
        s.n = n;
        s.num_classes = num_classes;
        s.size = size;
        s.noise = noise;
        s.separation = separation;
        s.seed = seed;
        return generate_dataset(s);
      },
      arg("generator") = "gaussian-blobs", arg("n") = 20, arg("num_classes") = 2, arg("size") = 2000,
      arg("noise") = 1.0, arg("separation") = 2.0, arg("seed") = 0);
  m.def("split_dataset", &split_dataset, arg("data"), arg("test_size"));
  m.def("load_dataset", &load_dataset, arg("path"));

  // networks
  py::class_<MicroNet>(m, "MicroNet")
      .def_static(
          "random",
          [](std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t num_classes,
             std::uint64_t seed) {
            Rng rng = make_rng(seed, Stream::kInit);
            return MicroNet::random(input_dim, hidden, num_classes, rng);
          },
          arg("input_dim"), arg("hidden"), arg("num_classes"), arg("seed") = 0)
      .def_property_readonly("input_dim", &MicroNet::input_dim)
      .def_property_readonly("num_classes", &MicroNet::num_classes)
      .def_property_readonly("weights",
                             [](const MicroNet& net) {
                               std::vector<std::pair<Matrix, Vector>> out;
                               for (const auto& l : net.layers()) out.emplace_back(l.weights, l.bias);
                               return out;
                             })
      .def("forward", &MicroNet::forward, arg("x"))
      .def("predict", &MicroNet::predict, arg("x"))
      .def(
          "loss_and_grad",
          [](const MicroNet& net, const Vector& x, int y) {
            auto r = net.loss_and_input_grad(x, y);
            return std::make_pair(r.loss, r.grad);
          },
          arg("x"), arg("y"), "Cross-entropy and its gradient with respect to x.")
      .def("accuracy", [](const MicroNet& net, const Dataset& d) { return accuracy(net, d); }, arg("data"))
      .def("to_json", [](const MicroNet& net) { return model_to_json(net); })
      .def_static("from_json", &model_from_json, arg("text"))
      .def("save", [](const MicroNet& net, const std::filesystem::path& p) { save_model(net, p); }, arg("path"))
      .def(py::self == py::self);
  m.def("load_model", &load_model, arg("path"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init([](const std::vector<std::size_t>& hidden, std::size_t epochs, double lr, std::size_t batch,
                       std::uint64_t seed) { return TrainConfig{hidden, epochs, lr, batch, seed}; }),
           arg("hidden") = std::vector<std::size_t>{32}, arg("epochs") = 20, arg("lr") = 0.05, arg("batch") = 32,
           arg("seed") = 0)
      .def_readwrite("hidden", &TrainConfig::hidden)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("batch", &TrainConfig::batch)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("model", &TrainResult::model)
      .def_readonly("final_loss", &TrainResult::final_loss)
      .def_readonly("train_accuracy", &TrainResult::train_accuracy)
      .def_readonly("test_accuracy", &TrainResult::test_accuracy);

  m.def("train_sgd", &train_sgd, arg("train"), arg("config") = TrainConfig{}, arg("holdout") = nullptr, Release());

  py::class_<LinearOracle>(m, "LinearOracle")
      .def(py::init([](const Vector& w, double b) { return LinearOracle{w, b}; }), arg("w"), arg("b") = 0.0)
      .def_readonly("w", &LinearOracle::w)
      .def_readonly("b", &LinearOracle::b)
      .def("predict", &LinearOracle::predict, arg("x"))
      .def("to_micronet", &LinearOracle::to_micronet)
      .def(
          "expected_sparsity",
          [](const LinearOracle& o, const Vector& x, int y, double eps) {
            return linear_expected_sparsity(o, {x, y}, eps).radians();
          },
          arg("x"), arg("y"), arg("eps"), "Analytic expected L2 sparsity over uniform directions.");

  // attacks
  py::class_<attack::AttackConfig>(m, "AttackConfig")
      .def(py::init([](std::size_t steps, std::optional<double> step_size, const std::string& ascent,
                       bool changed_prediction, bool clamp_unit_box) {
             attack::AttackConfig c;
             c.steps = steps;
             c.step_size = step_size;
             c.ascent = attack::parse_ascent(ascent);
             c.success = changed_prediction ? attack::SuccessCriterion::kChangedPrediction
                                            : attack::SuccessCriterion::kTrueLabel;
             c.clamp_unit_box = clamp_unit_box;
             return c;
           }),
           arg("steps") = 20, arg("step_size") = std::nullopt, arg("ascent") = "sign",
           arg("changed_prediction") = false, arg("clamp_unit_box") = false)
      .def_readwrite("steps", &attack::AttackConfig::steps)
      .def_readwrite("step_size", &attack::AttackConfig::step_size)
      .def_property_readonly("ascent", [](const attack::AttackConfig& c) { return attack::to_string(c.ascent); });

  m.def(
      "pgd",
      [](const MicroNet& model, const Vector& x, int y, const std::string& norm, double eps,
         const attack::AttackConfig& config) {
        const auto r = attack::pgd(model, {x, y}, threat(norm, eps), config);
        return std::make_pair(r.perturbation, r.success);
      },
      arg("model"), arg("x"), arg("y"), arg("norm"), arg("eps"), arg("config") = attack::AttackConfig{}, Release(),
      "Returns (perturbation, success).");
  m.def(
      "adversarial_train",
      [](const Dataset& train, const std::string& norm, double eps, const attack::AttackConfig& attack,
         const TrainConfig& config, const Dataset* holdout) {
        return attack::adversarial_train(train, threat(norm, eps), attack, config, holdout);
      },
      arg("train"), arg("norm"), arg("eps"), arg("attack") = attack::AttackConfig{}, arg("config") = TrainConfig{},
      arg("holdout") = nullptr, Release());
  m.def(
      "adversarial_accuracy",
      [](const MicroNet& model, const Dataset& data, const std::string& norm, double eps,
         const attack::AttackConfig& config, std::size_t workers) {
        return attack::adversarial_accuracy(model, data, threat(norm, eps), config, workers);
      },
      arg("model"), arg("data"), arg("norm"), arg("eps"), arg("config") = attack::AttackConfig{},
      arg("workers") = 1, Release());

  // estimator
  py::class_<estimator::EstimatorConfig>(m, "EstimatorConfig")
      .def(py::init([](std::size_t directions, std::size_t search_steps, const attack::AttackConfig& attack,
                       std::uint64_t seed, bool warm_start, std::size_t max_points, std::size_t workers) {
             estimator::EstimatorConfig c;
             c.directions = directions;
             c.search_steps = search_steps;
             c.attack = attack;
             c.seed = seed;
             c.warm_start = warm_start;
             c.max_points = max_points;
             c.workers = workers;
             c.validate();
             return c;
           }),
           arg("directions") = 100, arg("search_steps") = 10, arg("attack") = attack::AttackConfig{},
           arg("seed") = 0, arg("warm_start") = false, arg("max_points") = 100, arg("workers") = 1)
      .def_readwrite("directions", &estimator::EstimatorConfig::directions)
      .def_readwrite("search_steps", &estimator::EstimatorConfig::search_steps)
      .def_readwrite("seed", &estimator::EstimatorConfig::seed)
      .def_readwrite("workers", &estimator::EstimatorConfig::workers);

  py::class_<estimator::PointSparsity>(m, "PointSparsity")
      .def_readonly("mean", &estimator::PointSparsity::mean)
      .def_readonly("robust", &estimator::PointSparsity::robust)
      .def_property_readonly("values", [](const estimator::PointSparsity& p) {
        std::vector<double> v;
        for (const auto& r : p.records) v.push_back(r.value);
        return v;
      });

  py::class_<estimator::DatasetReport>(m, "DatasetReport")
      .def_readonly("natural_accuracy", &estimator::DatasetReport::natural_accuracy)
      .def_readonly("adversarial_accuracy", &estimator::DatasetReport::adversarial_accuracy)
      .def_readonly("residual_sparsity", &estimator::DatasetReport::residual_sparsity)
      .def_readonly("points", &estimator::DatasetReport::points)
      .def_readonly("vulnerable_points", &estimator::DatasetReport::vulnerable_points)
      .def_readonly("evaluated_points", &estimator::DatasetReport::evaluated_points)
      .def_readonly("robust_default", &estimator::DatasetReport::robust_default);

  py::class_<estimator::SweepRow>(m, "SweepRow")
      .def_readonly("eps", &estimator::SweepRow::eps)
      .def_readonly("natural_accuracy", &estimator::SweepRow::natural_accuracy)
      .def_readonly("adversarial_accuracy", &estimator::SweepRow::adversarial_accuracy)
      .def_readonly("residual_sparsity", &estimator::SweepRow::residual_sparsity);

  m.def(
      "point_sparsity",
      [](const MicroNet& model, const Vector& x, int y, const std::string& norm, double eps,
         const estimator::EstimatorConfig& config, std::size_t point_id) {
        return estimator::point_sparsity(model, {x, y}, threat(norm, eps), config, point_id);
      },
      arg("model"), arg("x"), arg("y"), arg("norm"), arg("eps"), arg("config") = estimator::EstimatorConfig{},
      arg("point_id") = 0, Release());
  m.def(
      "dataset_eval",
      [](const MicroNet& model, const Dataset& data, const std::string& norm, double eps,
         const estimator::EstimatorConfig& config) {
        return estimator::dataset_eval(model, data, threat(norm, eps), config);
      },
      arg("model"), arg("data"), arg("norm"), arg("eps"), arg("config") = estimator::EstimatorConfig{}, Release());
  m.def(
      "epsilon_sweep",
      [](const MicroNet& model, const Dataset& data, const std::vector<double>& eps_list, const std::string& norm,
         const estimator::EstimatorConfig& config) {
        return estimator::epsilon_sweep(model, data, eps_list, attack::parse_norm(norm), config);
      },
      arg("model"), arg("data"), arg("eps_list"), arg("norm"), arg("config") = estimator::EstimatorConfig{},
      Release());

  // reports
  m.def(
      "theory_table_csv",
      [](const std::vector<std::size_t>& n_list, const std::vector<double>& k_list, std::size_t trials,
         std::uint64_t seed, std::optional<std::string> norm, std::size_t workers) {
        std::optional<attack::Norm> nm;
        if (norm) nm = attack::parse_norm(*norm);
        return harness::theory_to_csv(harness::theory_table(n_list, k_list, trials, seed, nm, workers));
      },
      arg("n_list"), arg("k_list"), arg("trials") = 10000, arg("seed") = 0, arg("norm") = std::nullopt,
      arg("workers") = 1, Release());
  m.def("git_blob_hash", [](const py::bytes& b) { return harness::git_blob_hash(std::string(b)); }, arg("data"));
}
