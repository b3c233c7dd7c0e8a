#pragma once

#include <stdexcept>
#include <string>

namespace psnet {

// Error taxonomy mirrors the CLI exit codes: config -> 2, data -> 3, numeric -> 4.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Dimension/shape mismatches are a species of bad data.
struct ShapeError : DataError {
    explicit ShapeError(const std::string& msg) : DataError(msg) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace psnet
