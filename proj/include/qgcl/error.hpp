#pragma once

#include <stdexcept>
#include <string>

namespace qgcl {

// Base for every failure raised by the library. Subsystems throw the most
// specific subclass; callers that only need a diagnostic catch Error.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent input data (files, CSV rows, descriptors).
class FormatError : public Error {
public:
    using Error::Error;
};

// A value outside the domain an operation accepts.
class DomainError : public Error {
public:
    using Error::Error;
};

}  // namespace qgcl
