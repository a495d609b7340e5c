#pragma once

#include <stdexcept>
#include <string>

namespace fwdpca {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclass onto its exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept = 0;
    virtual const char* category() const noexcept = 0;
};

/// Bad command line or unusable configuration.
class UsageError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 1; }
    const char* category() const noexcept override { return "usage"; }
};

/// Input data violates a precondition (shape, kind, units, parse failure).
class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
    const char* category() const noexcept override { return "data"; }
};

/// A numerical procedure could not produce a meaningful result.
class NumericalError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
    const char* category() const noexcept override { return "numerical"; }
};

}  // namespace fwdpca
