#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace pact {

// Stable machine-readable error codes. The first block is the Provider wire
// set; the rest are library-local conditions that never cross the wire.
enum class ErrorCode {
    AuthFailed,
    Conflict,
    NotPermitted,
    QuotaExhausted,
    PoolExhausted,
    NotFound,
    BadSignature,
    Forbidden,
    NotHuman,
    // local-only
    InvalidOtk,
    Tamper,
    HandshakeFailed,
    ChannelClosed,
    BadInput,
    Internal,
};

std::string_view error_code_name(ErrorCode c);
std::optional<ErrorCode> error_code_from_name(std::string_view name);

struct Error {
    ErrorCode code;
    std::string message;
};

// Minimal expected-style result. Ok-or-Error; no exceptions on protocol paths.
template <class T>
class Result {
public:
    Result(T value) : value_(std::move(value)) {}
    Result(Error err) : error_(std::move(err)) {}
    Result(ErrorCode code, std::string message)
        : error_(Error{code, std::move(message)}) {}

    bool ok() const { return value_.has_value(); }
    explicit operator bool() const { return ok(); }

    T& value() { return *value_; }
    const T& value() const { return *value_; }
    T& operator*() { return *value_; }
    const T& operator*() const { return *value_; }
    T* operator->() { return &*value_; }
    const T* operator->() const { return &*value_; }

    const Error& error() const { return *error_; }
    ErrorCode code() const { return error_->code; }

private:
    std::optional<T> value_;
    std::optional<Error> error_;
};

template <>
class Result<void> {
public:
    Result() = default;
    Result(Error err) : error_(std::move(err)) {}
    Result(ErrorCode code, std::string message)
        : error_(Error{code, std::move(message)}) {}

    bool ok() const { return !error_.has_value(); }
    explicit operator bool() const { return ok(); }

    const Error& error() const { return *error_; }
    ErrorCode code() const { return error_->code; }

private:
    std::optional<Error> error_;
};

}  // namespace pact
