#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace unbalance {

enum class ErrorKind {
    InvalidArgument,
    PositiveSequenceZero,
    DegenerateTriple,
    NotRealizable,
    EmptyBand,
    ParseError,
    NotRadial,
    DanglingReference,
    NonConvergence,
    CollapsedVoltage,
    SharesInfeasible,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::PositiveSequenceZero: return "PositiveSequenceZero";
        case ErrorKind::DegenerateTriple: return "DegenerateTriple";
        case ErrorKind::NotRealizable: return "NotRealizable";
        case ErrorKind::EmptyBand: return "EmptyBand";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::NotRadial: return "NotRadial";
        case ErrorKind::DanglingReference: return "DanglingReference";
        case ErrorKind::NonConvergence: return "NonConvergence";
        case ErrorKind::CollapsedVoltage: return "CollapsedVoltage";
        case ErrorKind::SharesInfeasible: return "SharesInfeasible";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above so
/// callers (the CLI in particular) can map it to a stable exit status.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        fail(ErrorKind::InvalidArgument, message);
    }
}

}  // namespace unbalance
