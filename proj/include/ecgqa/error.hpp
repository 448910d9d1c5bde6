#pragma once

#include <stdexcept>
#include <string>

namespace ecgqa {

enum class ErrorKind {
    InvalidGeometry,
    UndefinedAmplitude,
    InvalidMetric,
    ParameterError,
    LayoutError,
    InsufficientSignal,
    DetectionError,
    UndefinedCorrelation,
    UndefinedSeparation,
    IncompleteEvidence,
    ProfileError,
    SchemaViolation,
    Transport,
    Timeout,
    ConfigError,
    IoError,
};

const char* to_string(ErrorKind kind);

/// Domain error carrying a machine-readable kind next to the message.
class EcgError : public std::runtime_error {
public:
    EcgError(ErrorKind kind, const std::string& msg)
        : std::runtime_error(std::string(to_string(kind)) + ": " + msg), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidGeometry: return "invalid-geometry";
        case ErrorKind::UndefinedAmplitude: return "undefined-amplitude";
        case ErrorKind::InvalidMetric: return "invalid-metric";
        case ErrorKind::ParameterError: return "parameter-error";
        case ErrorKind::LayoutError: return "layout-error";
        case ErrorKind::InsufficientSignal: return "insufficient-signal";
        case ErrorKind::DetectionError: return "detection-error";
        case ErrorKind::UndefinedCorrelation: return "undefined-correlation";
        case ErrorKind::UndefinedSeparation: return "undefined-separation";
        case ErrorKind::IncompleteEvidence: return "incomplete-evidence";
        case ErrorKind::ProfileError: return "profile-error";
        case ErrorKind::SchemaViolation: return "schema-violation";
        case ErrorKind::Transport: return "transport-error";
        case ErrorKind::Timeout: return "timeout";
        case ErrorKind::ConfigError: return "config-error";
        case ErrorKind::IoError: return "io-error";
    }
    return "unknown-error";
}

} // namespace ecgqa
