#pragma once

#include <stdexcept>
#include <string>

namespace isosim {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid scenario/plan/process wiring detected before a run starts.
struct ConfigError : Error {
    using Error::Error;
};

/// Argument outside an operation's stated domain.
struct DomainError : Error {
    using Error::Error;
};

/// No roofline parameters reproduce the supplied anchors within tolerance.
struct CalibrationError : Error {
    using Error::Error;
};

/// Rate search could not find a stable rate at or above the floor.
struct SearchFailed : Error {
    using Error::Error;
};

/// Executor failure surfaced while running a timed batch.
struct BatchError : Error {
    using Error::Error;
};

/// Malformed input file (registry, profile, scenario, results).
struct ParseError : Error {
    using Error::Error;
};

struct InvalidSize : Error {
    using Error::Error;
};

struct UnsupportedRegime : Error {
    using Error::Error;
};

} // namespace isosim
