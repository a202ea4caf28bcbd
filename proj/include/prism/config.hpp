#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/facet.hpp"
#include "prism/meta.hpp"
#include "prism/tasks.hpp"
#include "prism/train.hpp"

namespace prism {

enum class Equalize { None, ZeroPad, Pca };

struct FacetEntry {
  std::string name;
  std::filesystem::path path;
  FacetFormat format = FacetFormat::Auto;
  Equalize equalize = Equalize::None;
  int target_dim = 0;
};

struct SyntheticEntry {
  enum class Kind { Separable, Tagging, Rotated } kind = Kind::Separable;
  SeparableSpec separable;
  TaggingSpec tagging;
  RotatedSpec rotated;
};

/// Everything a CLI run needs. Relative paths are resolved against the
/// directory of the config file.
struct RunConfig {
  std::vector<FacetEntry> facets;
  std::optional<SyntheticEntry> synthetic;
  BaselineKind mode = BaselineKind::Prism;
  ProjectionOverride projection = ProjectionOverride::Default;
  int meta_dim = 0;
  TaskKind task = TaskKind::Classify;
  std::filesystem::path train_path, val_path, test_path;
  TrainConfig train;
  double beta = 0.001;  // retraction strength
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";
  nlohmann::json raw;  // the document as given, for the run manifest
};

/// Strict parse: unknown keys, wrong types and missing required fields are
/// InvalidConfig errors; referenced files must exist.
RunConfig parse_run_config(const nlohmann::json &doc, const std::filesystem::path &base_dir);
RunConfig load_run_config(const std::filesystem::path &path);

}  // namespace prism
