#pragma once

#include <stdexcept>
#include <string>

namespace selconv {

// Raised when an external asset (image, mesh, model, graph dump) is
// malformed. The CLI maps this to its own exit code, distinct from
// usage errors and verification failures.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace selconv
