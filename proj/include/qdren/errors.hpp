#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qdren {

// Root of every error the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shapes of operands do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

// A value outside the documented domain of an operation.
class ArgumentError : public Error {
public:
    using Error::Error;
};

// API misuse (e.g. backward from a non-scalar, oversized gradcheck config).
class UsageError : public Error {
public:
    using Error::Error;
};

// NaN/Inf where finiteness is required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Token sequence does not fit the model's masks.
class EncodingError : public Error {
public:
    using Error::Error;
};

// Structurally malformed input (e.g. missing placeholder).
class FormatError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace qdren
