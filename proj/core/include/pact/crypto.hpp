#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "pact/bytes.hpp"
#include "pact/errors.hpp"

namespace pact::crypto {

// Ed25519 signatures, X25519 key agreement, SHA-256 hashing, HKDF-SHA256
// derivation, XChaCha20-Poly1305 AEAD. Wire encodings: raw 32-byte keys,
// 64-byte signatures, AEAD output = nonce || ciphertext || tag.

inline constexpr std::size_t kKeyBytes = 32;
inline constexpr std::size_t kSignatureBytes = 64;
inline constexpr std::size_t kDigestBytes = 32;

using PublicKey = std::array<std::uint8_t, kKeyBytes>;     // signing
using SecretKey = std::array<std::uint8_t, kKeyBytes>;     // signing (seed)
using ExchangePublicKey = std::array<std::uint8_t, kKeyBytes>;
using ExchangeSecretKey = std::array<std::uint8_t, kKeyBytes>;
using Signature = std::array<std::uint8_t, kSignatureBytes>;
using Digest = std::array<std::uint8_t, kDigestBytes>;

// Aborts the process if the underlying library cannot initialize (no usable
// entropy source). Idempotent; called lazily by every operation below.
void init();

struct SigningKeyPair {
    PublicKey public_key{};
    SecretKey secret_key{};
};

struct ExchangeKeyPair {
    ExchangePublicKey public_key{};
    ExchangeSecretKey secret_key{};
};

struct SharedKey {
    std::array<std::uint8_t, 32> key{};
    bool operator==(const SharedKey&) const = default;
};

struct Certificate {
    std::string subject_id;
    PublicKey subject_public{};
    Signature issuer_signature{};

    bool operator==(const Certificate&) const = default;
};

SigningKeyPair keygen_sign();
ExchangeKeyPair keygen_exchange();

Signature sign(const SecretKey& sk, const Bytes& message);
// False on any mismatch, including malformed signature bytes.
bool verify(const PublicKey& pk, const Bytes& message, const Signature& sig);
bool verify(const PublicKey& pk, const Bytes& message, const Bytes& sig);

// X25519. Rejects the all-zero / low-order public keys that collapse the
// shared secret.
Result<Bytes> dh(const ExchangeSecretKey& secret, const ExchangePublicKey& peer_public);

// HKDF-SHA256 with a fixed protocol-version info label; 32-byte output.
Result<SharedKey> kdf(const Bytes& ikm);

Bytes seal(const SharedKey& key, const Bytes& plaintext);
Result<Bytes> open(const SharedKey& key, const Bytes& ciphertext);

Digest hash(const Bytes& message);

Bytes random_bytes(std::size_t n);

// The byte string a certificate's issuer signs.
Bytes certificate_tbs(const std::string& subject_id, const PublicKey& subject_public);

Certificate make_certificate(const SecretKey& issuer_secret, const std::string& subject_id,
                             const PublicKey& subject_public);
bool verify_certificate(const PublicKey& issuer_public, const Certificate& cert);

// Salted memory-hard password hashing (Argon2id). `interactive=false` selects
// the cheapest parameters, for tests.
std::string password_hash(const std::string& password, bool interactive = true);
bool password_verify(const std::string& stored, const std::string& password);

}  // namespace pact::crypto
