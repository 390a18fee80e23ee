#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "pact/crypto.hpp"
#include "pact/errors.hpp"
#include "pact/guards.hpp"
#include "pact/messages.hpp"
#include "pact/policy.hpp"
#include "pact/provider.hpp"
#include "pact/token.hpp"
#include "pact/transport.hpp"

namespace pact {

// Everything one agent holds locally after registration. The OTK secrets
// live in otk_store and are deleted on first use; nothing here ever leaves
// the process except the public halves.
struct AgentIdentity {
    AgentId agent_id;
    EndpointDescriptor endpoint;
    crypto::SigningKeyPair tls_keys;
    crypto::Certificate tls_cert;
    crypto::ExchangeKeyPair access_keys;      // PAC / SAC
    crypto::Signature owner_signature{};      // over <aid, ED, PK_A, PAC, PK_Prov>
    crypto::Signature provider_signature{};   // Provider attestation
    crypto::Certificate owner_cert;           // crt_U
    OtkStore otk_store;

    InitiatorInfo initiator_info() const;
};

// Output of the user-side registration step: the submission sent to the
// Provider plus the matching one-time secrets the agent keeps.
struct RegistrationMaterial {
    AgentSubmission submission;
    std::vector<crypto::ExchangeKeyPair> otk_pairs;
};

RegistrationMaterial prepare_registration(const crypto::SecretKey& owner_secret,
                                          const AgentId& agent_id,
                                          const EndpointDescriptor& endpoint,
                                          const ContactPolicy& policy,
                                          const crypto::SigningKeyPair& tls_keys,
                                          const crypto::Certificate& tls_cert,
                                          const crypto::ExchangeKeyPair& access_keys,
                                          const crypto::PublicKey& provider_public,
                                          std::size_t otk_count);

// Fresh signed OTKs for a pool refresh; pairs[i] matches signed[i].
struct OtkBatch {
    std::vector<crypto::ExchangeKeyPair> pairs;
    std::vector<SignedOtk> signed_otks;
};
OtkBatch make_signed_otks(const crypto::SecretKey& owner_secret, const AgentId& agent_id,
                          std::size_t count);

// Application layer stand-in: bytes in, bytes out. Invoked only for requests
// that passed token validation. May run concurrently across sessions.
using AppHandler = std::function<Bytes(const Bytes&)>;

AppHandler make_echo_handler();
// Replies from a fixed script, one entry per accepted request, then empty.
AppHandler make_scripted_handler(std::vector<std::string> replies);

using Clock = std::function<std::int64_t()>;
std::int64_t system_clock_seconds();

struct AgentRuntimeConfig {
    TokenParams token_params;
    GuardToggles toggles;
    crypto::PublicKey provider_public{};
    crypto::PublicKey ca_public{};
    Clock clock;  // defaults to system time
    std::function<void(const Frame&)> frame_tap;
};

// Receiving side: listens at the identity's endpoint, walks each inbound
// channel through identify -> token issuance -> validated requests. Requests
// rejected by the ledger never reach the handler.
class AgentRuntime {
public:
    AgentRuntime(AgentIdentity& identity, AgentRuntimeConfig config, AppHandler handler);
    ~AgentRuntime();

    Result<void> start(Network& network);
    void stop();
    std::uint16_t port() const { return port_; }

    TokenLedger& ledger() { return ledger_; }
    std::uint64_t handler_invocations() const { return handler_invocations_.load(); }

private:
    void serve_loop();
    void handle_connection(std::unique_ptr<Pipe> pipe);
    // Returns the response frame; sets `fatal` when the session must end.
    Frame handle_frame(const Frame& frame, bool channel_verified,
                       const std::string& channel_id,
                       std::optional<crypto::ExchangePublicKey>& session_pac, bool& fatal);

    AgentIdentity& identity_;
    AgentRuntimeConfig config_;
    AppHandler handler_;
    TokenLedger ledger_;
    std::unique_ptr<Listener> listener_;
    std::mutex conn_mu_;
    std::set<Pipe*> active_pipes_;  // closed by stop() to unblock workers
    std::thread accept_thread_;
    std::vector<std::thread> workers_;
    std::atomic<bool> running_{false};
    std::atomic<std::uint64_t> handler_invocations_{0};
    std::uint16_t port_ = 0;
};

struct InitiatorConfig {
    crypto::PublicKey provider_public{};
    crypto::PublicKey ca_public{};
    Clock clock;
};

// Initiating side: resolves contacts through the Provider, verifies grants,
// runs the key agreement, caches tokens, and retries through a fresh
// resolve cycle at most once per request when a token runs out.
class Initiator {
public:
    Initiator(AgentIdentity& identity, InitiatorConfig config, ProviderClient& provider,
              Network& agent_network);
    ~Initiator();

    Result<Bytes> send_request(const AgentId& receiver, const Bytes& payload);
    Result<void> release_token(const AgentId& receiver);

    // Completed Provider resolve cycles (grant obtained and token issued).
    std::uint64_t resolve_cycles() const { return resolve_cycles_.load(); }

private:
    struct Session {
        std::unique_ptr<SecureChannel> channel;
    };

    Result<Session*> ensure_channel(const AgentId& receiver,
                                    const EndpointDescriptor& endpoint);
    // Full resolve -> verify -> connect -> identify -> token request cycle.
    Result<void> resolve_cycle(const AgentId& receiver);
    Result<void> identify(SecureChannel& channel);

    AgentIdentity& identity_;
    InitiatorConfig config_;
    ProviderClient& provider_;
    Network& network_;
    TokenCache cache_;
    std::map<std::string, Session> sessions_;  // receiver id -> channel
    std::atomic<std::uint64_t> resolve_cycles_{0};
    std::mutex mu_;
};

// Grant verification used by the initiator before any contact: crt_U1 under
// the CA, sigma_A^U1 over the agent binding, sigma_OTK^U1 over the OTK.
Result<void> verify_grant(const ContactGrant& grant, const crypto::PublicKey& ca_public,
                          const crypto::PublicKey& provider_public);

// Receiver-side check of an identify payload: certificate chain, channel
// identity match, Provider attestation. Returns the initiator's PAC.
Result<crypto::ExchangePublicKey> verify_initiator(
    const InitiatorInfo& info, const crypto::Signature& provider_signature,
    const std::string& channel_id, bool channel_verified,
    const crypto::PublicKey& ca_public, const crypto::PublicKey& provider_public,
    const GuardToggles& toggles);

}  // namespace pact
