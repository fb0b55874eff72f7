#pragma once

#include <stdexcept>
#include <string>

namespace kd {

// Base for everything thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or size of an input does not match what the operation requires.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// An operation was called outside its contract (e.g. backward on a non-scalar).
class ContractError : public Error {
public:
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Bad configuration value or malformed config file. CLI exit status 2.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Bad dataset contents (labels out of range, empty splits, ...). CLI exit status 3.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// File read/write failure.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// A numeric result left the representable range (e.g. exp overflow in a weight map).
class OverflowError : public Error {
public:
    explicit OverflowError(const std::string& msg) : Error(msg) {}
};

// An input that is structurally valid but mathematically unusable (e.g. all-zero
// tensor where a density is required).
class DegenerateInputError : public Error {
public:
    explicit DegenerateInputError(const std::string& msg) : Error(msg) {}
};

// A user-supplied function produced a non-finite value during a numeric check.
class EvalError : public Error {
public:
    explicit EvalError(const std::string& msg) : Error(msg) {}
};

} // namespace kd
