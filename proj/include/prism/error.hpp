#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace prism {

enum class Errc {
  DimensionMismatch,
  DuplicateToken,
  NonFiniteValue,
  EmptyFile,
  EmptyFacet,
  NoFacets,
  TargetSmallerThanSource,
  TargetTooLarge,
  NoConvergence,
  InvalidDimensions,
  NonFinite,
  EmptyExample,
  NonFiniteGradient,
  EmptyDataset,
  MalformedLine,
  EmptyTokenList,
  EmptySentence,
  LengthMismatch,
  DegenerateInput,
  UnknownToken,
  InvalidConfig,
  Io,
};

std::string_view to_string(Errc code);

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string &what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace prism
