// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bwlasso {

/// Base of every error raised by the library. `exit_code()` is the process
/// exit status the CLI maps the error to.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 2; }
};

/// Invalid parameters or configuration (usage error).
class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 1; }
};

/// Operand sizes do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Input is valid in shape but carries no usable information (all-zero
/// reference, orthogonal signals, ...).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// Malformed file content. Carries the byte offset where parsing failed, or
/// the 1-based line for text formats.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
    explicit FormatError(const std::string& what) : Error(what), offset_(0) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// A file could not be opened or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Numerical failure inside a solver.
class NumericalError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Normal-equation matrix is numerically singular.
class RankDeficiencyError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Iterative learning loop is diverging.
class DivergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace bwlasso
