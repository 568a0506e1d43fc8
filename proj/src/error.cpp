#include "crbig/error.hpp"

namespace crbig {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::TooLarge: return "TooLarge";
        case ErrorKind::DegenerateMarginal: return "DegenerateMarginal";
        case ErrorKind::InsufficientData: return "InsufficientData";
        case ErrorKind::Diverged: return "Diverged";
        case ErrorKind::ArchMismatch: return "ArchMismatch";
        case ErrorKind::CorruptModel: return "CorruptModel";
        case ErrorKind::NotSupported: return "NotSupported";
        case ErrorKind::DegenerateSamples: return "DegenerateSamples";
        case ErrorKind::EmptyBand: return "EmptyBand";
        case ErrorKind::BadRecordSize: return "BadRecordSize";
        case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorKind::CorruptHeader: return "CorruptHeader";
        case ErrorKind::PatchTooLarge: return "PatchTooLarge";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

int exit_code(ErrorKind kind) noexcept {
    // 1 is left for uncategorized failures, 2 for CLI usage errors.
    return 10 + static_cast<int>(kind);
}

} // namespace crbig
