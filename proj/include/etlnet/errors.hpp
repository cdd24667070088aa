#pragma once

#include <stdexcept>
#include <string>

namespace etlnet {

// Base class so callers can catch everything the library raises in one place.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor extents or channel counts that do not compose.
class DimensionError : public Error {
public:
    using Error::Error;
};

// A caller-supplied value outside its documented domain.
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Input data that is well formed but unusable (single class, empty split, ...).
class DataError : public Error {
public:
    using Error::Error;
};

// Malformed files: CSV rows, caches, checkpoints.
class FormatError : public Error {
public:
    using Error::Error;
};

// Bad configuration keys or values.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Internal misuse, e.g. a backward pass fed a cache from another forward call.
class ContractViolation : public Error {
public:
    using Error::Error;
};

}  // namespace etlnet
