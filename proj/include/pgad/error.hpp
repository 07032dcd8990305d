#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pgad {

enum class ErrorKind {
    Config,
    Shape,
    Range,
    Protocol,
    Usage,
    Numeric,
    Metric,
    Label,
    EmptyBatch,
    Io,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library. `what()` is a single line of the form
/// "<kind>: <message>" so the CLI can forward it verbatim.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& message() const noexcept { return message_; }

private:
    ErrorKind kind_;
    std::string message_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool cond, ErrorKind kind, const std::string& message) {
    if (!cond) fail(kind, message);
}

}  // namespace pgad
