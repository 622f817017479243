#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace onhs {

// Error vocabulary for the whole system. The names double as the wire
// protocol's ERR codes, so they are stable identifiers.
enum class Err {
    // handle grammar and DNS embedding
    BadHandle,
    BadLabel,
    WrongRoot,

    // key handling and signatures
    UnknownAlg,
    BadDigestLen,
    BadKey,
    BadSignature,
    KeyMismatch,

    // registry lifecycle
    HandleExists,
    NotFound,
    StateFinal,
    SeqReplay,
    BadAddress,
    SelfDelegation,
    SelfTransfer,
    CorruptLog,
    CorruptSnapshot,

    // resolution
    Cancelled,
    Compromised,
    NoBinding,
    Expired,
    Cycle,
    ChainTooLong,

    // reference model
    BadRoute,
    Discontiguous,
    NotAdjacent,
    NoRoute,
    Loop,
    HopLimit,
    OverlappingRanges,
    UnknownName,
    UnknownHandle,
    ScriptError,

    // service plumbing
    BadRequest,
    BadResponse,
    IoError,
};

std::string_view err_name(Err code);

// Reverse mapping for the wire protocol and scenario scripts. Returns
// false when the name is unknown.
bool err_from_name(std::string_view name, Err& out);

struct Error {
    Err code;
    std::string detail;  // free text, may be empty
    long aux = -1;       // optional numeric payload (failing hop index, last seq)

    std::string to_string() const;
};

inline Error make_error(Err code, std::string detail = {}, long aux = -1) {
    return Error{code, std::move(detail), aux};
}

// Minimal expected-style result. The project targets C++20, which has no
// std::expected yet; this covers the subset we need.
template <typename T>
class [[nodiscard]] Result {
public:
    Result(T value) : data_(std::move(value)) {}
    Result(Error error) : data_(std::move(error)) {}

    static Result failure(Err code, std::string detail = {}, long aux = -1) {
        return Result(Error{code, std::move(detail), aux});
    }

    bool ok() const { return std::holds_alternative<T>(data_); }
    explicit operator bool() const { return ok(); }

    const T& value() const& { return std::get<T>(data_); }
    T& value() & { return std::get<T>(data_); }
    T&& take() && { return std::get<T>(std::move(data_)); }

    const Error& error() const { return std::get<Error>(data_); }
    Err code() const { return error().code; }

private:
    std::variant<T, Error> data_;
};

template <>
class [[nodiscard]] Result<void> {
public:
    Result() = default;
    Result(Error error) : error_(std::move(error)), failed_(true) {}

    static Result failure(Err code, std::string detail = {}, long aux = -1) {
        return Result(Error{code, std::move(detail), aux});
    }

    bool ok() const { return !failed_; }
    explicit operator bool() const { return ok(); }

    const Error& error() const { return error_; }
    Err code() const { return error_.code; }

private:
    Error error_{Err::IoError, {}, -1};
    bool failed_ = false;
};

}  // namespace onhs
