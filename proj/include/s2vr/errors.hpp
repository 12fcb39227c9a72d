#pragma once

#include <stdexcept>
#include <string>

namespace s2vr {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid scalar parameter (non-positive bandwidth, negative weight, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Matrix or vector dimensions do not conform.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Training data cannot support a fit (too few samples, zero variance, non-finite values).
class DataError : public Error {
public:
    using Error::Error;
};

/// A quantity is mathematically undefined for the given input (zero-norm kernel, constant vector).
class DegenerateError : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    using Error::Error;
};

class GeometryError : public Error {
public:
    using Error::Error;
};

class RenderError : public Error {
public:
    using Error::Error;
};

/// Malformed, truncated or corrupted serialized data.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Operation not valid for the model's output mode.
class ModeError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace s2vr
