#pragma once

#include <stdexcept>
#include <string>

namespace docbench {

// Precondition or argument-range violation by the caller.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Unreadable input or unwritable output.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad or incomplete run configuration (including a missing credential).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A generation backend gave up; carries the last underlying cause.
class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace docbench
