#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace iqclab {

enum class ErrorKind {
    InvalidArgument,
    InvariantViolation,
    DimensionMismatch,
    NotSPD,
    OutOfDomain,
    NotOrientationPreserving,
    MissingQ,
    NonFiniteSample,
    RegionClassificationFailure,
    OptimizerDiverged,
    NonFiniteEnergy,
    NonZeroMeanDivergence,
    StepOutOfDomain,
    DetResidualExceeded,
    NoClosedFormEnvelope,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::InvariantViolation: return "InvariantViolation";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::NotSPD: return "NotSPD";
        case ErrorKind::OutOfDomain: return "OutOfDomain";
        case ErrorKind::NotOrientationPreserving: return "NotOrientationPreserving";
        case ErrorKind::MissingQ: return "MissingQ";
        case ErrorKind::NonFiniteSample: return "NonFiniteSample";
        case ErrorKind::RegionClassificationFailure: return "RegionClassificationFailure";
        case ErrorKind::OptimizerDiverged: return "OptimizerDiverged";
        case ErrorKind::NonFiniteEnergy: return "NonFiniteEnergy";
        case ErrorKind::NonZeroMeanDivergence: return "NonZeroMeanDivergence";
        case ErrorKind::StepOutOfDomain: return "StepOutOfDomain";
        case ErrorKind::DetResidualExceeded: return "DetResidualExceeded";
        case ErrorKind::NoClosedFormEnvelope: return "NoClosedFormEnvelope";
    }
    return "Unknown";
}

/// Numerical failures (as opposed to bad input) map to a distinct CLI exit code.
constexpr bool is_numerical_failure(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::OptimizerDiverged:
        case ErrorKind::NonFiniteEnergy:
        case ErrorKind::StepOutOfDomain:
        case ErrorKind::DetResidualExceeded:
        case ErrorKind::NonFiniteSample:
        case ErrorKind::RegionClassificationFailure:
            return true;
        default:
            return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace iqclab
