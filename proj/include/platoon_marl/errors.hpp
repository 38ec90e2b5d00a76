#pragma once

#include <stdexcept>
#include <string>

namespace platoon_marl {

/// Invalid or inconsistent configuration (bad key, out-of-range value, infeasible geometry).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numeric precondition was violated (non-positive distance, power above p_max, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A raw actor output could not be turned into an ActionCommand.
class DecodeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Tensor or network shapes do not chain.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace platoon_marl
