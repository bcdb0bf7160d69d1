// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#pragma once

#include <stdexcept>
#include <string>

namespace morphdet {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration (CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

// Violated operation precondition: bad shapes, domains, labels (CLI exit code 3).
struct InputError : Error {
    using Error::Error;
};

// Filesystem-level problems. Subclassed so callers can tell the cases apart.
struct IoError : Error {
    using Error::Error;
};
struct FileNotFoundError : IoError {
    using IoError::IoError;
};
struct UnsupportedFormatError : IoError {
    using IoError::IoError;
};
struct CorruptDataError : IoError {
    using IoError::IoError;
};

// Pipeline artifacts missing or mutually inconsistent (CLI exit code 3).
struct ArtifactError : Error {
    using Error::Error;
};

// Sub-band selection produced an unusable (empty) result.
struct SelectionError : Error {
    using Error::Error;
};

// Non-finite values where finite ones are required (CLI exit code 4).
struct NumericError : Error {
    using Error::Error;
};

// Score sets that cannot support the requested metric.
struct MetricError : InputError {
    using InputError::InputError;
};

}  // namespace morphdet
