#pragma once

#include <filesystem>
#include <istream>
#include <ostream>

#include "prism/train.hpp"

namespace prism {

/// Binary parameter file: "PRISMP1\0", then little-endian u64 shapes and
/// float64 values (meta layer first, then the head).
void write_model(std::ostream &out, const Model &model);
Model read_model(std::istream &in);

void save_model(const std::filesystem::path &path, const Model &model);
Model load_model(const std::filesystem::path &path);

}  // namespace prism
