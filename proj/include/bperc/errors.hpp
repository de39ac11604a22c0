#pragma once

#include <stdexcept>
#include <string>

namespace bperc {

// Bad argument to an operation (chart-invalid point, negative radius, ...).
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A configuration that downstream modules cannot honor.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An internal invariant failed; results produced so far are not trustworthy.
struct InvariantError : std::logic_error {
  explicit InvariantError(const std::string& invariant, const std::string& detail = {})
      : std::logic_error("invariant violated: " + invariant + (detail.empty() ? "" : " (" + detail + ")")),
        name(invariant) {}
  std::string name;
};

}  // namespace bperc
