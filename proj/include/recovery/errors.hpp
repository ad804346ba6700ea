#pragma once

#include <stdexcept>
#include <string>

namespace recovery {

/// Invalid configuration or API misuse detected before or while a run is set up.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// A model invariant was violated during a run.
class ModelError : public std::logic_error {
 public:
  explicit ModelError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace recovery
