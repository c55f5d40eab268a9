#pragma once

#include <stdexcept>
#include <string>

namespace maskcal {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operands or tensors with incompatible dimensions.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Malformed or unsupported file content (MSKT, PNM, manifests, models).
class FormatError : public Error {
public:
    using Error::Error;
};

// Parameter outside its mathematical domain (p < 1, alpha <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

}  // namespace maskcal
