#include "advsparse/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "advsparse/errors.hpp"

namespace advsparse {

using json = nlohmann::json;

namespace {

constexpr int kDatasetFormatVersion = 1;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void validate(const SyntheticDatasetSpec& spec) {
  if (spec.size < 1) throw UsageError("dataset size must be >= 1");
  if (spec.n < 1) throw UsageError("dataset dimension must be >= 1");
  if (spec.num_classes < 2) throw UsageError("dataset needs at least two classes");
  if (!(spec.noise >= 0.0) || !std::isfinite(spec.noise)) throw UsageError("noise must be finite and >= 0");
  if (!(spec.separation > 0.0) || !std::isfinite(spec.separation)) throw UsageError("separation must be > 0");
  if (spec.generator == Generator::kConcentricRings && spec.n < 2) {
    throw UsageError("concentric-rings needs n >= 2");
  }
  if (spec.generator == Generator::kXorGrid && (spec.n < 2 || spec.num_classes != 2)) {
    throw UsageError("xor-grid needs n >= 2 and exactly two classes");
  }
}

Vector gaussian(std::size_t n, double sd, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = sd * gauss(rng);
  return v;
}

}  // namespace

Generator parse_generator(const std::string& name) {
  if (name == "gaussian-blobs") return Generator::kGaussianBlobs;
  if (name == "concentric-rings") return Generator::kConcentricRings;
  if (name == "xor-grid") return Generator::kXorGrid;
  throw UsageError("unknown generator '" + name + "' (expected gaussian-blobs, concentric-rings or xor-grid)");
}

std::string to_string(Generator g) {
  switch (g) {
    case Generator::kGaussianBlobs: return "gaussian-blobs";
    case Generator::kConcentricRings: return "concentric-rings";
    case Generator::kXorGrid: return "xor-grid";
  }
  return "unknown";
}

Dataset generate_dataset(const SyntheticDatasetSpec& spec) {
  validate(spec);
  Rng rng = make_rng(spec.seed, Stream::kData);
  Dataset data;
  data.n = spec.n;
  data.num_classes = spec.num_classes;
  data.generator = to_string(spec.generator);
  data.seed = spec.seed;
  data.noise = spec.noise;
  data.examples.reserve(spec.size);

  std::vector<Vector> centers;
  if (spec.generator == Generator::kGaussianBlobs) {
    if (spec.n == 1) {
      for (std::size_t c = 0; c < spec.num_classes; ++c) {
        centers.push_back(Vector::Constant(1, spec.separation * (2.0 * static_cast<double>(c) + 1.0 -
                                                                  static_cast<double>(spec.num_classes))));
      }
    } else if (spec.num_classes == 2) {
      const Vector axis = geometry::sample_uniform_sphere(spec.n, rng).coords();
      centers = {Vector(-spec.separation * axis), Vector(spec.separation * axis)};
    } else {
      for (std::size_t c = 0; c < spec.num_classes; ++c) {
        centers.push_back(spec.separation * geometry::sample_uniform_sphere(spec.n, rng).coords());
      }
    }
  }

  std::uniform_int_distribution<int> coin(0, 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < spec.size; ++i) {
    const int label = static_cast<int>(i % spec.num_classes);
    LabeledExample ex{Vector(), label};
    switch (spec.generator) {
      case Generator::kGaussianBlobs:
        ex.x = centers[static_cast<std::size_t>(label)] + gaussian(spec.n, spec.noise, rng);
        break;
      case Generator::kConcentricRings: {
        const double radius = spec.separation * (label + 1) + spec.noise * gauss(rng);
        ex.x = radius * geometry::sample_uniform_sphere(spec.n, rng).coords();
        break;
      }
      case Generator::kXorGrid: {
        const int s0 = coin(rng) == 0 ? -1 : 1;
        const int s1 = coin(rng) == 0 ? -1 : 1;
        ex.x = gaussian(spec.n, spec.noise, rng);
        ex.x[0] += spec.separation * s0;
        ex.x[1] += spec.separation * s1;
        ex.y = s0 == s1 ? 0 : 1;
        break;
      }
    }
    data.examples.push_back(std::move(ex));
  }
  return data;
}

std::pair<Dataset, Dataset> split_dataset(Dataset data, std::size_t test_size) {
  if (test_size >= data.size()) throw UsageError("test split must leave at least one training example");
  Dataset test = data;
  test.examples.assign(std::make_move_iterator(data.examples.end() - static_cast<std::ptrdiff_t>(test_size)),
                       std::make_move_iterator(data.examples.end()));
  data.examples.resize(data.size() - test_size);
  return {std::move(data), std::move(test)};
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".json");
  return p;
}

void save_dataset(const Dataset& data, const std::filesystem::path& csv_path) {
  if (sidecar_path(csv_path) == csv_path) throw UsageError("dataset path must not end in .json");
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw UsageError("cannot write dataset file: " + csv_path.string());
  for (const auto& ex : data.examples) {
    for (Eigen::Index i = 0; i < ex.x.size(); ++i) csv << format_double(ex.x[i]) << ',';
    csv << ex.y << '\n';
  }
  json meta = {{"format", "advsparse.dataset"},
               {"version", kDatasetFormatVersion},
               {"n", data.n},
               {"C", data.num_classes},
               {"size", data.size()},
               {"generator", data.generator},
               {"seed", data.seed},
               {"noise", data.noise}};
  std::ofstream side(sidecar_path(csv_path), std::ios::binary);
  if (!side) throw UsageError("cannot write dataset sidecar for " + csv_path.string());
  side << meta.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& csv_path) {
  std::ifstream side(sidecar_path(csv_path), std::ios::binary);
  if (!side) throw UsageError("missing dataset sidecar: " + sidecar_path(csv_path).string());
  json meta;
  try {
    meta = json::parse(side);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed dataset sidecar: ") + e.what(),
                     sidecar_path(csv_path).string() + ": byte " + std::to_string(e.byte));
  }
  Dataset data;
  try {
    if (meta.at("version").get<int>() != kDatasetFormatVersion) {
      throw UnsupportedVersion("unsupported dataset format version " + meta.at("version").dump());
    }
    data.n = meta.at("n").get<std::size_t>();
    data.num_classes = meta.at("C").get<std::size_t>();
    data.generator = meta.value("generator", std::string("external"));
    data.seed = meta.value("seed", std::uint64_t{0});
    data.noise = meta.value("noise", 0.0);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid dataset sidecar: ") + e.what(), sidecar_path(csv_path).string());
  }

  std::ifstream csv(csv_path, std::ios::binary);
  if (!csv) throw UsageError("cannot open dataset file: " + csv_path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = csv_path.string() + ":" + std::to_string(line_no);
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != data.n + 1) {
      throw ParseError("expected " + std::to_string(data.n + 1) + " fields, found " + std::to_string(fields.size()),
                       where);
    }
    LabeledExample ex{Vector(static_cast<Eigen::Index>(data.n)), 0};
    for (std::size_t i = 0; i <= data.n; ++i) {
      std::size_t used = 0;
      try {
        if (i < data.n) {
          ex.x[static_cast<Eigen::Index>(i)] = std::stod(fields[i], &used);
        } else {
          ex.y = std::stoi(fields[i], &used);
        }
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != fields[i].size()) {
        throw ParseError("unparseable value '" + fields[i] + "'", where + ": column " + std::to_string(i + 1));
      }
    }
    if (ex.y < 0 || static_cast<std::size_t>(ex.y) >= data.num_classes) {
      throw ParseError("label out of range", where + ": column " + std::to_string(data.n + 1));
    }
    data.examples.push_back(std::move(ex));
  }
  return data;
}

}  // namespace advsparse
