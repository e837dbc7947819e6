#ifndef LPMGH_ERROR_HPP
#define LPMGH_ERROR_HPP

#include <stdexcept>
#include <string>

namespace lpmgh {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File missing or unreadable.
class IoError : public Error {
public:
    using Error::Error;
};

// Malformed file contents (ragged rows, bad magic, truncated stream).
class FormatError : public Error {
public:
    using Error::Error;
};

// Values outside the domain contract (NaN/Inf entries, non-sign codes).
class ValueError : public Error {
public:
    using Error::Error;
};

// Inconsistent parameters or preconditions chosen by the caller.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Dimension mismatch between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Numerical failure (singular solve, non-finite objective).
class NumericError : public Error {
public:
    using Error::Error;
};

// Structurally degenerate input (all-zero losses, zero bandwidth).
class DegenerateError : public Error {
public:
    using Error::Error;
};

// A multiview operation received the wrong number of views.
class MissingViewError : public ShapeError {
public:
    using ShapeError::ShapeError;
};

} // namespace lpmgh

#endif
