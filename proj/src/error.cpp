#include "prism/error.hpp"

namespace prism {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::DuplicateToken: return "DuplicateToken";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::EmptyFile: return "EmptyFile";
    case Errc::EmptyFacet: return "EmptyFacet";
    case Errc::NoFacets: return "NoFacets";
    case Errc::TargetSmallerThanSource: return "TargetSmallerThanSource";
    case Errc::TargetTooLarge: return "TargetTooLarge";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::InvalidDimensions: return "InvalidDimensions";
    case Errc::NonFinite: return "NonFinite";
    case Errc::EmptyExample: return "EmptyExample";
    case Errc::NonFiniteGradient: return "NonFiniteGradient";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::EmptyTokenList: return "EmptyTokenList";
    case Errc::EmptySentence: return "EmptySentence";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::UnknownToken: return "UnknownToken";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace prism
