#pragma once

#include <stdexcept>
#include <string>

namespace dpgen {

// Base of every error the library throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes are incompatible for an op.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Argument outside a function's mathematical domain (log of a negative, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Invalid configuration or violated precondition.
class ConfigError : public Error {
public:
    using Error::Error;
};

// File could not be read/written or is malformed.
class IoError : public Error {
public:
    using Error::Error;
};

// Training produced a non-finite value.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace dpgen
