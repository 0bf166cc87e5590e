#pragma once

#include <stdexcept>
#include <string>

namespace layervi {

/// Invalid user input: bad dimensions, inconsistent counts, malformed config.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical method failed to reach its tolerance.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace layervi
