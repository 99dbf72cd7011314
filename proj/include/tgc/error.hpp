#pragma once

#include <stdexcept>
#include <string>

namespace tgc {

/// Failure categories. The CLI maps them onto exit codes 1 / 2 / 3.
enum class ErrorKind { validation = 1, io = 2, numerical = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Bad argument values, out-of-range data, dimension mismatches.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

/// Malformed input file. Carries the line (1-based, text formats) or byte offset.
class FormatError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ShapeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Region or graph too small for the requested quantity.
class DegenerateError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

}  // namespace tgc
