#pragma once

#include <stdexcept>
#include <string>

namespace percept {

// Error categories aligned with the CLI exit codes:
// usage error -> 1, data error -> 2, anything else escaping -> 3.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InternalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Image loading failures, each distinguishable by type.
struct MissingFileError : DataError {
    using DataError::DataError;
};

struct MalformedHeaderError : DataError {
    using DataError::DataError;
};

struct TruncatedPayloadError : DataError {
    using DataError::DataError;
};

}  // namespace percept
