#pragma once

#include <stdexcept>
#include <string>

namespace dgan {

// Structural violation: bad layer chain, layout mismatch, invalid argument.
struct SpecError : std::runtime_error {
    explicit SpecError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values or numeric blow-up during evaluation/training.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid experiment configuration (unknown keys, bad values, parse errors).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File I/O and format errors (IDX parsing, checkpoint blobs).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace dgan
