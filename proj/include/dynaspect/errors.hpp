#pragma once

#include <stdexcept>
#include <string>

namespace dynaspect {

/// Array shapes that do not agree (frame counts, bin counts, grid sizes).
class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Arguments outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Invalid run configuration or solver parameters.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Input data that is malformed, missing, or inconsistent with the config.
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A non-finite value appeared during a numerical computation.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace dynaspect
