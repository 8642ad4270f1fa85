#pragma once

#include <stdexcept>
#include <string>

namespace drq {

enum class ErrorKind {
    InvalidArgument,
    Infeasible,
    Unbounded,
    IterationLimit,
    PreconditionViolated,
    HypothesesNotMet,
    DegenerateInterval,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::Unbounded: return "Unbounded";
    case ErrorKind::IterationLimit: return "IterationLimit";
    case ErrorKind::PreconditionViolated: return "PreconditionViolated";
    case ErrorKind::HypothesesNotMet: return "HypothesesNotMet";
    case ErrorKind::DegenerateInterval: return "DegenerateInterval";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it onto a stable exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// Validation errors are the caller's fault; everything else is a solver failure.
    bool is_validation() const noexcept {
        return kind_ == ErrorKind::InvalidArgument || kind_ == ErrorKind::DegenerateInterval;
    }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, const std::string& what) {
    if (!condition) fail(ErrorKind::InvalidArgument, what);
}

} // namespace drq
