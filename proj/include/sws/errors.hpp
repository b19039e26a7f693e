#pragma once

#include <stdexcept>
#include <string>

namespace sws {

/// Bad configuration: dimension mismatches, out-of-range settings.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or truncated input files.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Structural inconsistency found while decoding a stored artifact.
class CorruptionError : public DataError {
public:
    using DataError::DataError;
};

/// Non-finite losses or densities.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace sws
