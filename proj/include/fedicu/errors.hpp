#pragma once

#include <stdexcept>
#include <string>

namespace fedicu {

// Error taxonomy shared by all modules. Everything derives from Error so
// callers can catch the library as a whole or a specific failure class.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape disagreement; message names the offending tensor.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Bad argument values (labels outside {0,1}, empty inputs, rates out of range).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Malformed serialized data: parameter files, CSV rows, split files.
class FormatError : public Error {
public:
    using Error::Error;
};

// Invalid experiment/training configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Parameter layout mismatch during aggregation, transplant or restore.
class LayoutError : public Error {
public:
    using Error::Error;
};

// Metric undefined for the given inputs (single-class labels, no positives).
class MetricError : public Error {
public:
    using Error::Error;
};

}  // namespace fedicu
