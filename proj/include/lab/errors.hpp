#pragma once

#include <stdexcept>
#include <string>

namespace lab {

// Domain errors: bad parameter values (lambda <= 0, ell out of range, ...).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Two wave functions built on different grids or mode sets.
struct BasisError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Malformed configuration, schedule or scene description.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A numerical construction could not meet its own accuracy contract.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Wedge frame not aligned with the raster axes.
struct FrameError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace lab
