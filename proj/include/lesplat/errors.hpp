#pragma once

#include <stdexcept>
#include <string>

namespace lesplat {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A value violates a documented invariant or precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Text input (LLM reply, JSON document) could not be parsed.
class ParseError : public Error {
public:
    using Error::Error;
};

enum class FormatErrorCode {
    BadMagic,
    BadVersion,
    Truncated,
    TrailingBytes,
    NonFinite,
    BadHeader,
};

const char* to_string(FormatErrorCode code);

/// Binary or image file layout errors. Each failure mode has its own code.
class FormatError : public Error {
public:
    FormatError(FormatErrorCode code, const std::string& what)
        : Error(std::string(to_string(code)) + ": " + what), code_(code) {}

    FormatErrorCode code() const noexcept { return code_; }

private:
    FormatErrorCode code_;
};

/// HTTP failure after retries. status is 0 when no response was received.
class TransportError : public Error {
public:
    TransportError(int status, const std::string& what) : Error(what), status_(status) {}

    int status() const noexcept { return status_; }

private:
    int status_;
};

/// The endpoint answered but the body does not follow the chat-completion schema.
class ProtocolError : public Error {
public:
    using Error::Error;
};

} // namespace lesplat
