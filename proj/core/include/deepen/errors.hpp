#pragma once

#include <stdexcept>
#include <string>

namespace deepen {

/// Bad arguments, dimension mismatches, malformed files. CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical blow-up: non-finite iterates, non-SPD operators, runaway chains.
/// CLI exit code 3.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace deepen
