#include "kinex/error.hpp"

namespace kinex {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidConfig: return "invalid-config";
        case ErrorKind::InvalidState: return "invalid-state";
        case ErrorKind::InvalidParameter: return "invalid-parameter";
        case ErrorKind::InvalidInput: return "invalid-input";
        case ErrorKind::UndefinedAllocation: return "undefined-allocation";
        case ErrorKind::UndefinedMeasure: return "undefined-measure";
        case ErrorKind::EmptyInput: return "empty-input";
        case ErrorKind::EmptySeries: return "empty-series";
        case ErrorKind::InsufficientTail: return "insufficient-tail";
        case ErrorKind::NoOverlap: return "no-overlap";
        case ErrorKind::Validation: return "validation";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

}  // namespace kinex
