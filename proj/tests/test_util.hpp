#pragma once

#include <algorithm>
#include <cstring>
#include <optional>

#include "prism/error.hpp"

/// The error code thrown by `fn`, or nullopt when it returns normally.
template <typename Fn>
std::optional<prism::Errc> error_code(Fn &&fn) {
  try {
    fn();
  } catch (const prism::Error &e) {
    return e.code();
  }
  return std::nullopt;
}
