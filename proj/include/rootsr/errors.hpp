#pragma once

#include <stdexcept>
#include <string>

namespace rootsr {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Rect or index outside the source image.
struct BoundsError : Error {
    using Error::Error;
};

/// Precondition on an argument value violated.
struct ArgumentError : Error {
    using Error::Error;
};

/// Input carries no usable signal (constant map, identical samples).
struct DegenerateInputError : Error {
    using Error::Error;
};

/// File system / codec failure.
struct IoError : Error {
    using Error::Error;
};

/// Well-formed file in an unsupported variant (bit depth, color type).
struct FormatError : IoError {
    using IoError::IoError;
};

/// Invalid configuration; message names the offending field.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace rootsr
