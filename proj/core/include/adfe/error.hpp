#pragma once

#include <stdexcept>
#include <string>

namespace adfe {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad arguments or inconsistent shapes passed to an API.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Input data failed validation (corpus, config, model file).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numerical computation produced a non-finite or impossible value.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace adfe
