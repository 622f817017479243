#include "onhs/error.hpp"

#include <array>

namespace onhs {
namespace {

struct NameEntry {
    Err code;
    std::string_view name;
};

constexpr std::array<NameEntry, 36> kNames{{
    {Err::BadHandle, "BAD_HANDLE"},
    {Err::BadLabel, "BAD_LABEL"},
    {Err::WrongRoot, "WRONG_ROOT"},
    {Err::UnknownAlg, "UNKNOWN_ALG"},
    {Err::BadDigestLen, "BAD_DIGEST_LEN"},
    {Err::BadKey, "BAD_KEY"},
    {Err::BadSignature, "BAD_SIGNATURE"},
    {Err::KeyMismatch, "KEY_MISMATCH"},
    {Err::HandleExists, "HANDLE_EXISTS"},
    {Err::NotFound, "NOT_FOUND"},
    {Err::StateFinal, "STATE_FINAL"},
    {Err::SeqReplay, "SEQ_REPLAY"},
    {Err::BadAddress, "BAD_ADDRESS"},
    {Err::SelfDelegation, "SELF_DELEGATION"},
    {Err::SelfTransfer, "SELF_TRANSFER"},
    {Err::CorruptLog, "CORRUPT_LOG"},
    {Err::CorruptSnapshot, "CORRUPT_SNAPSHOT"},
    {Err::Cancelled, "CANCELLED"},
    {Err::Compromised, "COMPROMISED"},
    {Err::NoBinding, "NO_BINDING"},
    {Err::Expired, "EXPIRED"},
    {Err::Cycle, "CYCLE"},
    {Err::ChainTooLong, "CHAIN_TOO_LONG"},
    {Err::BadRoute, "BAD_ROUTE"},
    {Err::Discontiguous, "DISCONTIGUOUS"},
    {Err::NotAdjacent, "NOT_ADJACENT"},
    {Err::NoRoute, "NO_ROUTE"},
    {Err::Loop, "LOOP"},
    {Err::HopLimit, "HOP_LIMIT"},
    {Err::OverlappingRanges, "OVERLAPPING_RANGES"},
    {Err::UnknownName, "UNKNOWN_NAME"},
    {Err::UnknownHandle, "UNKNOWN_HANDLE"},
    {Err::ScriptError, "SCRIPT_ERROR"},
    {Err::BadRequest, "BAD_REQUEST"},
    {Err::BadResponse, "BAD_RESPONSE"},
    {Err::IoError, "IO_ERROR"},
}};

}  // namespace

std::string_view err_name(Err code) {
    for (const auto& entry : kNames) {
        if (entry.code == code) return entry.name;
    }
    return "UNKNOWN_ERROR";
}

bool err_from_name(std::string_view name, Err& out) {
    for (const auto& entry : kNames) {
        if (entry.name == name) {
            out = entry.code;
            return true;
        }
    }
    return false;
}

std::string Error::to_string() const {
    std::string s{err_name(code)};
    if (!detail.empty()) {
        s += ' ';
        s += detail;
    }
    if (aux >= 0) {
        s += " (";
        s += std::to_string(aux);
        s += ')';
    }
    return s;
}

}  // namespace onhs
