#include "pgad/error.hpp"

namespace pgad {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config: return "config";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::Range: return "range";
        case ErrorKind::Protocol: return "protocol";
        case ErrorKind::Usage: return "usage";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::Metric: return "metric";
        case ErrorKind::Label: return "label";
        case ErrorKind::EmptyBatch: return "empty-batch";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      message_(message) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace pgad
