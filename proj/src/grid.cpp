#include "surfcdm/grid.hpp"

#include <algorithm>

namespace surfcdm {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::EmptyMask: return "EmptyMask";
        case ErrorKind::NonStarShaped: return "NonStarShaped";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::InvalidSchedule: return "InvalidSchedule";
        case ErrorKind::InvalidScale: return "InvalidScale";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::ConfigMismatch: return "ConfigMismatch";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::NonFiniteActivation: return "NonFiniteActivation";
        case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::FormatError: return "FormatError";
        case ErrorKind::CorruptSample: return "CorruptSample";
        case ErrorKind::InvalidSpec: return "InvalidSpec";
        case ErrorKind::InvalidSize: return "InvalidSize";
        case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorKind::TooFewRuns: return "TooFewRuns";
    }
    return "Unknown";
}

std::size_t foreground_count(const CartesianMask& mask) {
    return static_cast<std::size_t>(
        std::count_if(mask.values().begin(), mask.values().end(), [](std::uint8_t v) { return v != 0; }));
}

int count_components(const CartesianMask& mask) {
    Grid<int> labels;
    return static_cast<int>(label_components(mask, [](std::uint8_t v) { return v != 0; }, labels).size());
}

}  // namespace surfcdm
