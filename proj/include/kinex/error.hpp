#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kinex {

enum class ErrorKind {
    InvalidConfig,
    InvalidState,
    InvalidParameter,
    InvalidInput,
    UndefinedAllocation,
    UndefinedMeasure,
    EmptyInput,
    EmptySeries,
    InsufficientTail,
    NoOverlap,
    Validation,
    Io,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace kinex
