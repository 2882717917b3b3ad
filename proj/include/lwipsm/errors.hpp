#pragma once

#include <stdexcept>
#include <string>

namespace lwipsm {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unsupported or inconsistent configuration (key sizes, weights, scenario files).
class ConfigError : public Error {
public:
    using Error::Error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Malformed canonical encoding.
class DecodeError : public Error {
public:
    using Error::Error;
};

/// Envelope could not be opened: wrong key or corrupted ciphertext.
class DecryptionError : public Error {
public:
    using Error::Error;
};

/// A protocol step was invoked in the wrong phase or with a bad message.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Dataset file violates the reading schema; carries the 1-based row.
class DatasetError : public Error {
public:
    DatasetError(const std::string& what, std::size_t row)
        : Error(what + " (row " + std::to_string(row) + ")"), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

}  // namespace lwipsm
