#pragma once

#include <stdexcept>
#include <string>

namespace rankforge {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input that violates a documented contract: malformed files, bad profiles,
// invalid datasets. Maps to CLI exit code 2 and HTTP 400.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A validation error attributable to one named field (covariate, column).
class FieldError : public ValidationError {
public:
    FieldError(std::string field, const std::string& message)
        : ValidationError(message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Factorization failures, rank deficiency, non-finite results. Exit code 3.
class NumericError : public Error {
public:
    using Error::Error;
};

// A basic parameter the evidence cannot identify.
class EstimabilityError : public NumericError {
public:
    using NumericError::NumericError;
};

}  // namespace rankforge
