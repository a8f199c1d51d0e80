#pragma once

#include <stdexcept>
#include <string>

namespace vmd {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or rank disagreement between operands.
struct DimensionError : Error {
    using Error::Error;
};

// A call that violates its contract (bad argument, wrong value range).
struct InvalidArgument : Error {
    using Error::Error;
};

// A call made in the wrong object state (e.g. backward twice on one graph).
struct StateError : Error {
    using Error::Error;
};

// Non-finite values where the numerics guarantee finiteness.
struct NumericError : Error {
    using Error::Error;
};

// File and serialization problems.
struct IoError : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

// Bad configuration or command usage.
struct UsageError : Error {
    using Error::Error;
};

// A requested trend/assertion did not hold.
struct AssertionError : Error {
    using Error::Error;
};

}  // namespace vmd
