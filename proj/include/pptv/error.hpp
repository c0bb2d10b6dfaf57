#pragma once

#include <stdexcept>
#include <string>

namespace pptv {

// Error taxonomy mapped to CLI exit codes:
//   ConfigError -> 2, IoError -> 3, NumericError -> 4, EmptyResultError -> 5.
// Shape/precondition violations inside the library are ConfigError: they are
// caller mistakes, not runtime failures.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dataset/checkpoint decode failures, kept distinct so callers can tell
// a wrong file apart from a damaged one.
struct BadMagicError : IoError {
    explicit BadMagicError(const std::string& msg) : IoError(msg) {}
};

struct TruncatedError : IoError {
    explicit TruncatedError(const std::string& msg) : IoError(msg) {}
};

struct ExtentError : IoError {
    explicit ExtentError(const std::string& msg) : IoError(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyResultError : std::runtime_error {
    explicit EmptyResultError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pptv
