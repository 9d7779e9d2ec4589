#pragma once

#include <stdexcept>
#include <string>

namespace rlfw {

/// Base class for every domain error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file; the message names the offending line.
class ParseError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// A numeric routine produced NaN/inf or was handed degenerate input.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace rlfw
