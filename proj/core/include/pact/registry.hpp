#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "pact/crypto.hpp"
#include "pact/errors.hpp"
#include "pact/guards.hpp"
#include "pact/messages.hpp"
#include "pact/policy.hpp"

namespace pact {

struct UserRecord {
    std::string user_id;
    std::string password_verifier;  // salted Argon2id string
    crypto::Certificate certificate;  // crt_U
};

struct PooledOtk {
    SignedOtk signed_otk;
    bool consumed = false;
};

struct AgentRecord {
    AgentId agent_id;
    std::string owner;  // user id
    EndpointDescriptor endpoint;
    crypto::Certificate tls_cert;
    crypto::ExchangePublicKey access_public{};
    std::vector<PooledOtk> otk_pool;
    ContactPolicy policy;
    crypto::Signature owner_signature{};
    crypto::Signature provider_signature{};
    bool active = true;
};

// External identity-verification hook for user registration. The default
// implementation approves everyone not on an explicit denylist.
class HumanVerifier {
public:
    virtual ~HumanVerifier() = default;
    virtual bool approve(const std::string& user_id) = 0;
};

class DenylistVerifier : public HumanVerifier {
public:
    void deny(const std::string& user_id) { denied_.insert(user_id); }
    bool approve(const std::string& user_id) override { return !denied_.contains(user_id); }

private:
    std::set<std::string> denied_;
};

// Write-ahead journal of registry mutations. Each entry is one JSON line;
// load() replays them in order. The in-memory implementation drops entries.
class Journal {
public:
    virtual ~Journal() = default;
    virtual void append(const std::string& json_line) = 0;
    virtual std::vector<std::string> load() = 0;
};

class MemoryJournal : public Journal {
public:
    void append(const std::string&) override {}
    std::vector<std::string> load() override { return {}; }
};

class FileJournal : public Journal {
public:
    explicit FileJournal(std::string path) : path_(std::move(path)) {}
    void append(const std::string& json_line) override;
    std::vector<std::string> load() override;

private:
    std::string path_;
};

struct RegistryConfig {
    bool interactive_password_hash = true;  // false: cheapest Argon2 params (tests)
    GuardToggles toggles;
};

// The Provider's authoritative state: user registry, agent registry, OTK
// pools, and per-(receiver, initiator) counters. All operations are
// linearizable; consume-and-decrement in resolve_contact is atomic.
class Registry {
public:
    Registry(crypto::SigningKeyPair provider_keys, crypto::PublicKey ca_public,
             std::shared_ptr<HumanVerifier> verifier = nullptr,
             std::shared_ptr<Journal> journal = nullptr, RegistryConfig config = {});

    const crypto::PublicKey& provider_public() const { return provider_keys_.public_key; }

    Result<void> register_user(const std::string& user_id, const std::string& password,
                               const crypto::Certificate& certificate);

    // Returns sigma_A^Prov on success. All-or-nothing.
    Result<crypto::Signature> register_agent(const std::string& user_id,
                                             const std::string& password,
                                             const AgentSubmission& submission);

    Result<ContactGrant> resolve_contact(const AgentId& initiator, const AgentId& receiver);

    Result<void> update_policy(const std::string& user_id, const std::string& password,
                               const AgentId& agent_id, const ContactPolicy& new_policy);

    // Clears the pair counter so the next resolve re-initializes it from the
    // current policy. Owner-only.
    Result<void> reset_counter(const std::string& user_id, const std::string& password,
                               const AgentId& agent_id, const AgentId& initiator);

    Result<void> refresh_otks(const std::string& user_id, const std::string& password,
                              const AgentId& agent_id, const std::vector<SignedOtk>& otks);

    Result<void> deactivate_agent(const std::string& user_id, const std::string& password,
                                  const AgentId& agent_id);

    // Re-verifies every stored certificate and signature.
    Result<void> audit() const;

    // Deterministic JSON snapshot of public state (no password verifiers).
    std::string dump() const;

    // Replays a journal into a fresh registry. Counters and consumed flags
    // are part of the journal, so a restart is state-identical.
    void replay();

    std::uint64_t resolve_success_count() const { return resolve_successes_.load(); }
    std::size_t unconsumed_otk_count(const AgentId& agent_id) const;
    int pair_counter(const AgentId& receiver, const AgentId& initiator) const;

private:
    Result<const UserRecord*> authenticate_locked(const std::string& user_id,
                                                  const std::string& password) const;
    Result<AgentRecord*> owned_agent_locked(const std::string& user_id,
                                            const AgentId& agent_id);
    void journal_put_agent_locked(const AgentRecord& rec);
    void apply_journal_line(const std::string& line);

    crypto::SigningKeyPair provider_keys_;
    crypto::PublicKey ca_public_;
    std::shared_ptr<HumanVerifier> verifier_;
    std::shared_ptr<Journal> journal_;
    RegistryConfig config_;

    mutable std::mutex mu_;
    std::map<std::string, UserRecord> users_;
    std::map<std::string, AgentRecord> agents_;            // aid -> record
    std::map<std::string, std::string> endpoints_in_use_;  // "ip:port" -> aid
    std::map<std::string, int> counters_;                  // "receiver|initiator" -> remaining
    std::atomic<std::uint64_t> resolve_successes_{0};
};

}  // namespace pact
