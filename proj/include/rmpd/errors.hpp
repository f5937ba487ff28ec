#pragma once

#include <stdexcept>
#include <string>

namespace rmpd {

/// Caller supplied a value that violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// File could not be read, written, or decoded.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A classifier backend failed (crashed child, bad model, inference error).
class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The external classifier violated the PDX1 wire protocol.
class ProtocolError : public BackendError {
public:
    using BackendError::BackendError;
};

}  // namespace rmpd
