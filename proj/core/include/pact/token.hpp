#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "pact/bytes.hpp"
#include "pact/crypto.hpp"
#include "pact/errors.hpp"
#include "pact/guards.hpp"
#include "pact/policy.hpp"

namespace pact {

// Receiver-side grace applied to the expiry check only, to absorb clock skew.
inline constexpr std::int64_t kExpirySkewGraceSeconds = 30;

// Decrypted access-token contents. The 16-byte nonce is the token identity
// (distinct from the AEAD nonce of the ciphertext).
struct TokenFields {
    std::array<std::uint8_t, 16> nonce{};
    std::int64_t issued_at = 0;   // UTC seconds
    std::int64_t expires_at = 0;  // UTC seconds
    std::uint32_t max_requests = 1;
    crypto::ExchangePublicKey initiator_pac{};
    Bytes task_label;  // optional scoping label, empty by default

    bool operator==(const TokenFields&) const = default;
};

// Fixed-order length-prefixed field encoding.
Bytes encode_token_fields(const TokenFields& fields);
Result<TokenFields> decode_token_fields(const Bytes& encoded);

struct AccessToken {
    Bytes ciphertext;

    bool operator==(const AccessToken&) const = default;
};

struct TokenParams {
    std::int64_t lifetime_seconds = 600;
    std::uint32_t max_requests = 10;
};

// One-time secret key store held by a receiving agent. Each entry is deleted
// on first (and only) shared-key derivation.
class OtkStore {
public:
    void add(const crypto::ExchangePublicKey& otk_public,
             const crypto::ExchangeSecretKey& otk_secret);
    std::size_t size() const;

    // SDHK = KDF(DH(SOTK, PAC_B)); consumes the entry.
    Result<crypto::SharedKey> consume_and_derive(const crypto::ExchangePublicKey& otk_public,
                                                 const crypto::ExchangePublicKey& initiator_pac);

private:
    mutable std::mutex mu_;
    std::map<std::string, crypto::ExchangeSecretKey> secrets_;  // hex(OTK) -> SOTK
};

// Initiator-side mirror: SDHK = KDF(DH(SAC_B, OTK_A)).
Result<crypto::SharedKey> derive_sdhk_initiator(const crypto::ExchangeSecretKey& sac,
                                                const crypto::ExchangePublicKey& otk_public);

enum class TokenReject {
    WrongHolder,
    Expired,
    QuotaExceeded,
    UnknownToken,
    Tampered,
};

std::string_view token_reject_name(TokenReject r);

struct TokenDecision {
    bool accepted = false;
    TokenReject reason = TokenReject::UnknownToken;
};

// Receiver-side usage accounting. Check-and-increment is atomic.
class TokenLedger {
public:
    explicit TokenLedger(GuardToggles toggles = {}) : toggles_(toggles) {}

    // Builds the token, records the ledger entry, returns the ciphertext.
    AccessToken issue(const crypto::SharedKey& sdhk, const TokenParams& params,
                      const crypto::ExchangePublicKey& initiator_pac, std::int64_t now,
                      const Bytes& task_label = {});

    TokenDecision validate(const AccessToken& token,
                           const crypto::ExchangePublicKey& presenter_pac, std::int64_t now);

    // Marks the entry dead; future presentations get UnknownToken. Idempotent.
    void release(const AccessToken& token);

    std::size_t live_count() const;

private:
    struct Entry {
        TokenFields fields;
        crypto::SharedKey sdhk;  // never persisted or transmitted
        std::uint32_t used = 0;
        bool released = false;
    };

    GuardToggles toggles_;
    mutable std::mutex mu_;
    std::map<std::string, std::string> by_ciphertext_;  // hex(sha256(ct)) -> nonce key
    std::map<std::string, Entry> by_nonce_;             // hex(nonce) -> entry
};

// Initiator-side token cache driving the reuse decision: a cached token is
// returned only while unexpired and below its locally tracked use count.
class TokenCache {
public:
    void put(const AgentId& receiver, const AccessToken& token, const TokenFields& fields);
    std::optional<AccessToken> should_reuse(const AgentId& receiver, std::int64_t now);
    void note_use(const AgentId& receiver);
    void drop(const AgentId& receiver);
    std::optional<AccessToken> current(const AgentId& receiver) const;

private:
    struct Entry {
        AccessToken token;
        TokenFields fields;
        std::uint32_t used = 0;
    };
    mutable std::mutex mu_;
    std::map<std::string, Entry> entries_;  // receiver id -> entry
};

}  // namespace pact
