#pragma once

#include <stdexcept>
#include <string>

namespace dmis {

// Domain error kinds. CLI maps any thrown Error to exit code 1 with a
// one-line diagnostic that names the kind.
enum class ErrorKind {
    EmptyAxis,
    DuplicateAxis,
    InvalidCount,
    InvalidRate,
    InvalidArch,
    ShapeError,
    ArchError,
    RangeError,
    InvalidEpsilon,
    InvalidValue,
    InvalidDims,
    CropError,
    LayoutError,
    LabelError,
    SplitError,
    IoError,
    CorruptRecord,
    EmptyGrid,
    InfeasibleAssignment,
    ScheduleConflict,
    InvalidTime,
    ModelError,
    InputError,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::EmptyAxis: return "EmptyAxis";
    case ErrorKind::DuplicateAxis: return "DuplicateAxis";
    case ErrorKind::InvalidCount: return "InvalidCount";
    case ErrorKind::InvalidRate: return "InvalidRate";
    case ErrorKind::InvalidArch: return "InvalidArch";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::ArchError: return "ArchError";
    case ErrorKind::RangeError: return "RangeError";
    case ErrorKind::InvalidEpsilon: return "InvalidEpsilon";
    case ErrorKind::InvalidValue: return "InvalidValue";
    case ErrorKind::InvalidDims: return "InvalidDims";
    case ErrorKind::CropError: return "CropError";
    case ErrorKind::LayoutError: return "LayoutError";
    case ErrorKind::LabelError: return "LabelError";
    case ErrorKind::SplitError: return "SplitError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::CorruptRecord: return "CorruptRecord";
    case ErrorKind::EmptyGrid: return "EmptyGrid";
    case ErrorKind::InfeasibleAssignment: return "InfeasibleAssignment";
    case ErrorKind::ScheduleConflict: return "ScheduleConflict";
    case ErrorKind::InvalidTime: return "InvalidTime";
    case ErrorKind::ModelError: return "ModelError";
    case ErrorKind::InputError: return "InputError";
    }
    return "UnknownError";
}

} // namespace dmis
