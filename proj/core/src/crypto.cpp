#include "pact/crypto.hpp"

#include <sodium.h>

#include <cstdlib>
#include <cstring>
#include <mutex>

namespace pact::crypto {

namespace {

// Domain-separation label for all key derivation in this protocol version.
constexpr char kKdfLabel[] = "pact/v1/sdhk";

constexpr std::size_t kAeadNonceBytes = crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;
constexpr std::size_t kAeadTagBytes = crypto_aead_xchacha20poly1305_ietf_ABYTES;

void hmac_sha256(const std::uint8_t* key, std::size_t key_len, const std::uint8_t* msg,
                 std::size_t msg_len, std::uint8_t out[32]) {
    crypto_auth_hmacsha256_state st;
    crypto_auth_hmacsha256_init(&st, key, key_len);
    crypto_auth_hmacsha256_update(&st, msg, msg_len);
    crypto_auth_hmacsha256_final(&st, out);
}

}  // namespace

void init() {
    static std::once_flag flag;
    std::call_once(flag, [] {
        if (sodium_init() < 0) {
            // No entropy source; nothing sensible can run.
            std::abort();
        }
    });
}

SigningKeyPair keygen_sign() {
    init();
    SigningKeyPair pair;
    unsigned char pk[crypto_sign_PUBLICKEYBYTES];
    unsigned char sk[crypto_sign_SECRETKEYBYTES];
    unsigned char seed[crypto_sign_SEEDBYTES];
    randombytes_buf(seed, sizeof seed);
    crypto_sign_seed_keypair(pk, sk, seed);
    std::memcpy(pair.public_key.data(), pk, kKeyBytes);
    std::memcpy(pair.secret_key.data(), seed, kKeyBytes);
    sodium_memzero(sk, sizeof sk);
    sodium_memzero(seed, sizeof seed);
    return pair;
}

ExchangeKeyPair keygen_exchange() {
    init();
    ExchangeKeyPair pair;
    randombytes_buf(pair.secret_key.data(), kKeyBytes);
    crypto_scalarmult_base(pair.public_key.data(), pair.secret_key.data());
    return pair;
}

Signature sign(const SecretKey& sk, const Bytes& message) {
    init();
    unsigned char pk[crypto_sign_PUBLICKEYBYTES];
    unsigned char full_sk[crypto_sign_SECRETKEYBYTES];
    crypto_sign_seed_keypair(pk, full_sk, sk.data());
    Signature sig;
    crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), full_sk);
    sodium_memzero(full_sk, sizeof full_sk);
    return sig;
}

bool verify(const PublicKey& pk, const Bytes& message, const Signature& sig) {
    init();
    return crypto_sign_verify_detached(sig.data(), message.data(), message.size(),
                                       pk.data()) == 0;
}

bool verify(const PublicKey& pk, const Bytes& message, const Bytes& sig) {
    if (sig.size() != kSignatureBytes) return false;
    Signature s;
    std::memcpy(s.data(), sig.data(), kSignatureBytes);
    return verify(pk, message, s);
}

Result<Bytes> dh(const ExchangeSecretKey& secret, const ExchangePublicKey& peer_public) {
    init();
    if (sodium_is_zero(peer_public.data(), kKeyBytes)) {
        return Error{ErrorCode::BadInput, "all-zero exchange public key"};
    }
    Bytes out(crypto_scalarmult_BYTES);
    if (crypto_scalarmult(out.data(), secret.data(), peer_public.data()) != 0) {
        return Error{ErrorCode::BadInput, "rejected exchange public key"};
    }
    // Low-order peer keys map every secret to the same output; X25519 signals
    // this with an all-zero shared secret.
    if (sodium_is_zero(out.data(), out.size())) {
        return Error{ErrorCode::BadInput, "low-order exchange public key"};
    }
    return out;
}

Result<SharedKey> kdf(const Bytes& ikm) {
    init();
    if (ikm.empty()) {
        return Error{ErrorCode::BadInput, "empty input keying material"};
    }
    // HKDF-SHA256, single 32-byte output block.
    std::uint8_t zero_salt[32] = {0};
    std::uint8_t prk[32];
    hmac_sha256(zero_salt, sizeof zero_salt, ikm.data(), ikm.size(), prk);

    Bytes info(kKdfLabel, kKdfLabel + sizeof(kKdfLabel) - 1);
    info.push_back(0x01);
    SharedKey out;
    std::uint8_t okm[32];
    hmac_sha256(prk, sizeof prk, info.data(), info.size(), okm);
    std::memcpy(out.key.data(), okm, 32);
    sodium_memzero(prk, sizeof prk);
    sodium_memzero(okm, sizeof okm);
    return out;
}

Bytes seal(const SharedKey& key, const Bytes& plaintext) {
    init();
    Bytes out(kAeadNonceBytes + plaintext.size() + kAeadTagBytes);
    randombytes_buf(out.data(), kAeadNonceBytes);
    unsigned long long clen = 0;
    crypto_aead_xchacha20poly1305_ietf_encrypt(
        out.data() + kAeadNonceBytes, &clen, plaintext.data(), plaintext.size(), nullptr, 0,
        nullptr, out.data(), key.key.data());
    out.resize(kAeadNonceBytes + clen);
    return out;
}

Result<Bytes> open(const SharedKey& key, const Bytes& ciphertext) {
    init();
    if (ciphertext.size() < kAeadNonceBytes + kAeadTagBytes) {
        return Error{ErrorCode::Tamper, "ciphertext too short"};
    }
    Bytes out(ciphertext.size() - kAeadNonceBytes - kAeadTagBytes);
    unsigned long long mlen = 0;
    if (crypto_aead_xchacha20poly1305_ietf_decrypt(
            out.data(), &mlen, nullptr, ciphertext.data() + kAeadNonceBytes,
            ciphertext.size() - kAeadNonceBytes, nullptr, 0, ciphertext.data(),
            key.key.data()) != 0) {
        return Error{ErrorCode::Tamper, "authentication failed"};
    }
    out.resize(mlen);
    return out;
}

Digest hash(const Bytes& message) {
    init();
    Digest d;
    crypto_hash_sha256(d.data(), message.data(), message.size());
    return d;
}

Bytes random_bytes(std::size_t n) {
    init();
    Bytes out(n);
    randombytes_buf(out.data(), n);
    return out;
}

Bytes certificate_tbs(const std::string& subject_id, const PublicKey& subject_public) {
    return Encoder{}.field("pact/cert").field(subject_id).field(subject_public).take();
}

Certificate make_certificate(const SecretKey& issuer_secret, const std::string& subject_id,
                             const PublicKey& subject_public) {
    Certificate cert;
    cert.subject_id = subject_id;
    cert.subject_public = subject_public;
    cert.issuer_signature = sign(issuer_secret, certificate_tbs(subject_id, subject_public));
    return cert;
}

bool verify_certificate(const PublicKey& issuer_public, const Certificate& cert) {
    return verify(issuer_public, certificate_tbs(cert.subject_id, cert.subject_public),
                  cert.issuer_signature);
}

std::string password_hash(const std::string& password, bool interactive) {
    init();
    char out[crypto_pwhash_STRBYTES];
    unsigned long long opslimit =
        interactive ? crypto_pwhash_OPSLIMIT_INTERACTIVE : crypto_pwhash_OPSLIMIT_MIN;
    std::size_t memlimit =
        interactive ? crypto_pwhash_MEMLIMIT_INTERACTIVE : crypto_pwhash_MEMLIMIT_MIN;
    if (crypto_pwhash_str(out, password.c_str(), password.size(), opslimit, memlimit) != 0) {
        std::abort();  // out of memory
    }
    return out;
}

bool password_verify(const std::string& stored, const std::string& password) {
    init();
    return crypto_pwhash_str_verify(stored.c_str(), password.c_str(), password.size()) == 0;
}

}  // namespace pact::crypto
