#include "pact/errors.hpp"

#include <array>
#include <utility>

namespace pact {

namespace {
constexpr std::array<std::pair<ErrorCode, std::string_view>, 15> kNames{{
    {ErrorCode::AuthFailed, "AUTH_FAILED"},
    {ErrorCode::Conflict, "CONFLICT"},
    {ErrorCode::NotPermitted, "NOT_PERMITTED"},
    {ErrorCode::QuotaExhausted, "QUOTA_EXHAUSTED"},
    {ErrorCode::PoolExhausted, "POOL_EXHAUSTED"},
    {ErrorCode::NotFound, "NOT_FOUND"},
    {ErrorCode::BadSignature, "BAD_SIGNATURE"},
    {ErrorCode::Forbidden, "FORBIDDEN"},
    {ErrorCode::NotHuman, "NOT_HUMAN"},
    {ErrorCode::InvalidOtk, "INVALID_OTK"},
    {ErrorCode::Tamper, "TAMPER"},
    {ErrorCode::HandshakeFailed, "HANDSHAKE_FAILED"},
    {ErrorCode::ChannelClosed, "CHANNEL_CLOSED"},
    {ErrorCode::BadInput, "BAD_INPUT"},
    {ErrorCode::Internal, "INTERNAL"},
}};
}  // namespace

std::string_view error_code_name(ErrorCode c) {
    for (const auto& [code, name] : kNames)
        if (code == c) return name;
    return "UNKNOWN";
}

std::optional<ErrorCode> error_code_from_name(std::string_view name) {
    for (const auto& [code, n] : kNames)
        if (n == name) return code;
    return std::nullopt;
}

}  // namespace pact
