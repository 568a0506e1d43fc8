#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crbig {

enum class ErrorKind {
    ShapeMismatch,
    TooLarge,
    DegenerateMarginal,
    InsufficientData,
    Diverged,
    ArchMismatch,
    CorruptModel,
    NotSupported,
    DegenerateSamples,
    EmptyBand,
    BadRecordSize,
    UnsupportedFormat,
    CorruptHeader,
    PatchTooLarge,
    InvalidConfig,
    Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Process exit code used by the CLI for each category (always nonzero).
int exit_code(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

} // namespace crbig
