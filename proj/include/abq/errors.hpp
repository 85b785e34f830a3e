#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace abq {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

/// Two inputs that must agree in dimension (e.g. bucket cardinality) do not.
struct ShapeError : Error {
    using Error::Error;
};

/// A simulation / dataset specification is internally inconsistent.
struct SpecError : Error {
    using Error::Error;
};

/// Snapshots presented out of order to a sequential monitor.
struct SequenceError : Error {
    using Error::Error;
};

/// Malformed input file; carries the 1-based line number.
struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t line_number)
        : Error(msg + " (line " + std::to_string(line_number) + ")"), line(line_number) {}
    std::size_t line;
};

}  // namespace abq
