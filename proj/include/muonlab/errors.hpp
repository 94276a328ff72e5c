#pragma once

#include <stdexcept>
#include <string>

namespace muonlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class NonFinite : public Error {
public:
    using Error::Error;
};

class NonConvergence : public Error {
public:
    using Error::Error;
};

class UnknownKind : public Error {
public:
    using Error::Error;
};

class UnknownVariant : public Error {
public:
    using Error::Error;
};

class DegenerateDirection : public Error {
public:
    using Error::Error;
};

class MissingDiagnostics : public Error {
public:
    using Error::Error;
};

class AllDiverged : public Error {
public:
    using Error::Error;
};

class KeyMissing : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Invalid argument values (bad config, out-of-range parameters).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

} // namespace muonlab
