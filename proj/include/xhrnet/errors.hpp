#pragma once

#include <stdexcept>
#include <string>

namespace xhrnet {

// Base for all domain errors thrown by this library. The CLI maps these to
// exit code 1; command-line usage problems exit with 2.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shapes or axes that do not line up.
struct DimError : Error {
    explicit DimError(const std::string& msg) : Error(msg) {}
};

// Structural misuse of a layer spec (groups not dividing channels, odd split, ...).
struct SpecError : Error {
    explicit SpecError(const std::string& msg) : Error(msg) {}
};

// Invalid network configuration.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Corrupt or mismatched on-disk data (weights file, CSV).
struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

// Inputs that are valid in shape but degenerate in content (all-zero heatmap).
struct DegenerateError : Error {
    explicit DegenerateError(const std::string& msg) : Error(msg) {}
};

// API misuse (e.g. backward from a non-scalar node).
struct UsageError : Error {
    explicit UsageError(const std::string& msg) : Error(msg) {}
};

}  // namespace xhrnet
