#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "prism/config.hpp"
#include "prism/train.hpp"

namespace prism {

/// Facets, baseline and encoded splits materialised from a RunConfig.
struct Workspace {
  RunConfig config;
  std::vector<Facet> facets;
  std::vector<std::string> facet_notes;  // equalisation applied per facet
  Baseline baseline;
  Dataset train, val, test;
  bool has_test = false;
  std::vector<std::string> class_names;
};

Workspace prepare(const RunConfig &config);

// Each command returns a process exit code and reports diagnostics on `err`.

int cmd_train(const std::filesystem::path &config_path, std::optional<std::filesystem::path> out_dir,
              std::ostream &out, std::ostream &err);
int cmd_export(const std::filesystem::path &params_path, const std::filesystem::path &config_path,
               const std::filesystem::path &out_path, std::ostream &out, std::ostream &err);
int cmd_eval(const std::filesystem::path &params_path, const std::filesystem::path &config_path,
             const std::string &split, std::optional<std::filesystem::path> out_dir, std::ostream &out,
             std::ostream &err);
int cmd_analyze(const std::filesystem::path &params_path, const std::filesystem::path &config_path,
                std::vector<std::uint64_t> seeds, std::size_t sample, std::optional<std::filesystem::path> out_dir,
                std::ostream &out, std::ostream &err);
int cmd_inspect(const std::filesystem::path &facet_path, std::ostream &out, std::ostream &err);
/// Writes a synthetic config's facets and splits as ordinary text files.
int cmd_generate(const std::filesystem::path &config_path, const std::filesystem::path &out_dir, std::ostream &out,
                 std::ostream &err);

}  // namespace prism
