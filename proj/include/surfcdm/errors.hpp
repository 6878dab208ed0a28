#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace surfcdm {

enum class ErrorKind {
    EmptyMask,
    NonStarShaped,
    InvalidConfig,
    InvalidSchedule,
    InvalidScale,
    LengthMismatch,
    ConfigMismatch,
    ShapeMismatch,
    NonFiniteActivation,
    NonFiniteLoss,
    IoError,
    FormatError,
    CorruptSample,
    InvalidSpec,
    InvalidSize,
    IndexOutOfRange,
    TooFewRuns,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace surfcdm
