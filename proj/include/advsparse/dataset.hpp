#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "advsparse/geometry.hpp"

namespace advsparse {

struct LabeledExample {
  Vector x;
  int y = 0;
};

/// In-memory dataset plus the metadata stored in its JSON sidecar.
struct Dataset {
  std::size_t n = 0;
  std::size_t num_classes = 0;
  std::string generator = "external";
  std::uint64_t seed = 0;
  double noise = 0.0;
  std::vector<LabeledExample> examples;

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }
};

enum class Generator { kGaussianBlobs, kConcentricRings, kXorGrid };

Generator parse_generator(const std::string& name);
std::string to_string(Generator g);

struct SyntheticDatasetSpec {
  Generator generator = Generator::kGaussianBlobs;
  std::size_t n = 20;
  std::size_t num_classes = 2;
  std::size_t size = 2000;
  double noise = 1.0;
  /// Distance of class centers (blobs), ring spacing (rings) or quadrant
  /// offset (xor) from the origin.
  double separation = 2.0;
  std::uint64_t seed = 0;
  /// Extra examples drawn from the same distribution for a held-out split.
  std::size_t test_size = 0;
};

/// Deterministic given spec.seed. Throws UsageError on an invalid spec.
Dataset generate_dataset(const SyntheticDatasetSpec& spec);

/// Moves the last `test_size` examples into a second dataset with the same
/// metadata. Generate with size + test_size and split to get a held-out set
/// that shares class centers with the training set.
std::pair<Dataset, Dataset> split_dataset(Dataset data, std::size_t test_size);

/// Path of the JSON sidecar that accompanies a CSV dataset file.
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

/// Writes `csv_path` (one row per example: features, then label) and its sidecar.
void save_dataset(const Dataset& data, const std::filesystem::path& csv_path);

/// Reads a CSV dataset and its sidecar. Throws ParseError with line/column on
/// malformed rows and UsageError when the file is missing.
Dataset load_dataset(const std::filesystem::path& csv_path);

}  // namespace advsparse
