#include "pact/token.hpp"

#include <cstring>

namespace pact {

Bytes encode_token_fields(const TokenFields& fields) {
    Encoder enc;
    enc.field(fields.nonce)
        .field_u64(static_cast<std::uint64_t>(fields.issued_at))
        .field_u64(static_cast<std::uint64_t>(fields.expires_at))
        .field_u64(fields.max_requests)
        .field(fields.initiator_pac)
        .field(fields.task_label);
    return enc.take();
}

namespace {

// Reads one length-prefixed field; advances offset.
bool read_field(const Bytes& buf, std::size_t& off, Bytes& out) {
    if (off + 4 > buf.size()) return false;
    std::uint32_t len = get_u32_be(buf.data() + off);
    off += 4;
    if (off + len > buf.size()) return false;
    out.assign(buf.begin() + off, buf.begin() + off + len);
    off += len;
    return true;
}

}  // namespace

Result<TokenFields> decode_token_fields(const Bytes& encoded) {
    TokenFields fields;
    std::size_t off = 0;
    Bytes f;
    if (!read_field(encoded, off, f) || f.size() != fields.nonce.size())
        return Error{ErrorCode::BadInput, "bad token nonce field"};
    std::memcpy(fields.nonce.data(), f.data(), f.size());
    if (!read_field(encoded, off, f) || f.size() != 8)
        return Error{ErrorCode::BadInput, "bad issued_at field"};
    fields.issued_at = static_cast<std::int64_t>(get_u64_be(f.data()));
    if (!read_field(encoded, off, f) || f.size() != 8)
        return Error{ErrorCode::BadInput, "bad expires_at field"};
    fields.expires_at = static_cast<std::int64_t>(get_u64_be(f.data()));
    if (!read_field(encoded, off, f) || f.size() != 8)
        return Error{ErrorCode::BadInput, "bad max_requests field"};
    fields.max_requests = static_cast<std::uint32_t>(get_u64_be(f.data()));
    if (!read_field(encoded, off, f) || f.size() != fields.initiator_pac.size())
        return Error{ErrorCode::BadInput, "bad initiator_pac field"};
    std::memcpy(fields.initiator_pac.data(), f.data(), f.size());
    if (!read_field(encoded, off, fields.task_label))
        return Error{ErrorCode::BadInput, "bad task_label field"};
    if (off != encoded.size())
        return Error{ErrorCode::BadInput, "trailing bytes in token"};
    return fields;
}

void OtkStore::add(const crypto::ExchangePublicKey& otk_public,
                   const crypto::ExchangeSecretKey& otk_secret) {
    std::lock_guard lock(mu_);
    secrets_[hex_encode(otk_public)] = otk_secret;
}

std::size_t OtkStore::size() const {
    std::lock_guard lock(mu_);
    return secrets_.size();
}

Result<crypto::SharedKey> OtkStore::consume_and_derive(
    const crypto::ExchangePublicKey& otk_public,
    const crypto::ExchangePublicKey& initiator_pac) {
    crypto::ExchangeSecretKey sotk;
    {
        std::lock_guard lock(mu_);
        auto it = secrets_.find(hex_encode(otk_public));
        if (it == secrets_.end()) {
            return Error{ErrorCode::InvalidOtk, "unknown or already-consumed OTK"};
        }
        sotk = it->second;
        secrets_.erase(it);  // one derivation per OTK, ever
    }
    auto shared = crypto::dh(sotk, initiator_pac);
    if (!shared) return shared.error();
    return crypto::kdf(*shared);
}

Result<crypto::SharedKey> derive_sdhk_initiator(const crypto::ExchangeSecretKey& sac,
                                                const crypto::ExchangePublicKey& otk_public) {
    auto shared = crypto::dh(sac, otk_public);
    if (!shared) return shared.error();
    return crypto::kdf(*shared);
}

std::string_view token_reject_name(TokenReject r) {
    switch (r) {
        case TokenReject::WrongHolder: return "WRONG_HOLDER";
        case TokenReject::Expired: return "EXPIRED";
        case TokenReject::QuotaExceeded: return "QUOTA_EXCEEDED";
        case TokenReject::UnknownToken: return "UNKNOWN_TOKEN";
        case TokenReject::Tampered: return "TAMPERED";
    }
    return "UNKNOWN_TOKEN";
}

namespace {
std::string ciphertext_key(const Bytes& ct) {
    return hex_encode(crypto::hash(ct));
}
}  // namespace

AccessToken TokenLedger::issue(const crypto::SharedKey& sdhk, const TokenParams& params,
                               const crypto::ExchangePublicKey& initiator_pac,
                               std::int64_t now, const Bytes& task_label) {
    TokenFields fields;
    auto nonce = crypto::random_bytes(fields.nonce.size());
    std::memcpy(fields.nonce.data(), nonce.data(), nonce.size());
    fields.issued_at = now;
    fields.expires_at = now + params.lifetime_seconds;
    fields.max_requests = params.max_requests;
    fields.initiator_pac = initiator_pac;
    fields.task_label = task_label;

    AccessToken token{crypto::seal(sdhk, encode_token_fields(fields))};

    std::lock_guard lock(mu_);
    Entry entry{fields, sdhk, 0, false};
    auto nonce_key = hex_encode(fields.nonce);
    by_nonce_[nonce_key] = std::move(entry);
    by_ciphertext_[ciphertext_key(token.ciphertext)] = nonce_key;
    return token;
}

TokenDecision TokenLedger::validate(const AccessToken& token,
                                    const crypto::ExchangePublicKey& presenter_pac,
                                    std::int64_t now) {
    std::lock_guard lock(mu_);
    Entry* entry = nullptr;
    auto ct_it = by_ciphertext_.find(ciphertext_key(token.ciphertext));
    if (ct_it != by_ciphertext_.end()) {
        entry = &by_nonce_.at(ct_it->second);
    } else {
        // Not a ciphertext we issued. Only the holder of a session SDHK can
        // produce a different ciphertext that still authenticates; anything
        // else is a mutation or garbage.
        for (auto& [nonce_key, candidate] : by_nonce_) {
            auto opened = crypto::open(candidate.sdhk, token.ciphertext);
            if (!opened) continue;
            auto fields = decode_token_fields(*opened);
            if (fields && hex_encode(fields->nonce) == nonce_key) {
                entry = &candidate;
                break;
            }
        }
        if (!entry) {
            return {false, TokenReject::Tampered};
        }
    }

    if (entry->released) {
        return {false, TokenReject::UnknownToken};
    }
    if (toggles_.check_token_holder && entry->fields.initiator_pac != presenter_pac) {
        return {false, TokenReject::WrongHolder};
    }
    if (toggles_.check_token_expiry &&
        now > entry->fields.expires_at + kExpirySkewGraceSeconds) {
        return {false, TokenReject::Expired};
    }
    if (toggles_.enforce_token_quota && entry->used >= entry->fields.max_requests) {
        return {false, TokenReject::QuotaExceeded};
    }
    ++entry->used;
    return {true, TokenReject::UnknownToken};
}

void TokenLedger::release(const AccessToken& token) {
    std::lock_guard lock(mu_);
    auto ct_it = by_ciphertext_.find(ciphertext_key(token.ciphertext));
    if (ct_it == by_ciphertext_.end()) return;
    by_nonce_.at(ct_it->second).released = true;
}

std::size_t TokenLedger::live_count() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& [_, entry] : by_nonce_)
        if (!entry.released) ++n;
    return n;
}

void TokenCache::put(const AgentId& receiver, const AccessToken& token,
                     const TokenFields& fields) {
    std::lock_guard lock(mu_);
    entries_[receiver.str()] = Entry{token, fields, 0};
}

std::optional<AccessToken> TokenCache::should_reuse(const AgentId& receiver,
                                                    std::int64_t now) {
    std::lock_guard lock(mu_);
    auto it = entries_.find(receiver.str());
    if (it == entries_.end()) return std::nullopt;
    const Entry& e = it->second;
    if (now > e.fields.expires_at || e.used >= e.fields.max_requests) {
        entries_.erase(it);
        return std::nullopt;
    }
    return e.token;
}

void TokenCache::note_use(const AgentId& receiver) {
    std::lock_guard lock(mu_);
    auto it = entries_.find(receiver.str());
    if (it != entries_.end()) ++it->second.used;
}

void TokenCache::drop(const AgentId& receiver) {
    std::lock_guard lock(mu_);
    entries_.erase(receiver.str());
}

std::optional<AccessToken> TokenCache::current(const AgentId& receiver) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(receiver.str());
    if (it == entries_.end()) return std::nullopt;
    return it->second.token;
}

}  // namespace pact
