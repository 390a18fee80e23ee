#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "pact/crypto.hpp"
#include "pact/errors.hpp"
#include "pact/messages.hpp"
#include "pact/registry.hpp"
#include "pact/transport.hpp"

namespace pact {

// Internal certificate authority, deployed alongside the Provider. Signs
// <subject_id, subject_public> bindings for users and agents.
class CertificateAuthority {
public:
    CertificateAuthority() : keys_(crypto::keygen_sign()) {}
    explicit CertificateAuthority(crypto::SigningKeyPair keys) : keys_(std::move(keys)) {}

    crypto::Certificate issue(const std::string& subject_id,
                              const crypto::PublicKey& subject_public) const {
        return crypto::make_certificate(keys_.secret_key, subject_id, subject_public);
    }
    const crypto::PublicKey& public_key() const { return keys_.public_key; }
    const crypto::SigningKeyPair& keys() const { return keys_; }

private:
    crypto::SigningKeyPair keys_;
};

inline constexpr char kProviderSubjectId[] = "provider";

// Network front end over a Registry: accepts secure channels, dispatches
// length-prefixed JSON request payloads, maps registry errors to stable
// wire codes. Clients without a CA-signed certificate may connect but can
// only issue certificates and register users.
class ProviderService {
public:
    ProviderService(Registry& registry, const CertificateAuthority& ca,
                    crypto::SigningKeyPair tls_keys);

    Result<void> start(Network& network, const std::string& ip, std::uint16_t port);
    void stop();
    std::uint16_t port() const { return port_; }

    ~ProviderService() { stop(); }

private:
    void serve_loop();
    void handle_connection(std::unique_ptr<Pipe> pipe);
    std::string handle_request(const std::string& payload, const std::string& channel_id,
                               bool channel_verified);

    Registry& registry_;
    const CertificateAuthority& ca_;
    crypto::SigningKeyPair tls_keys_;
    crypto::Certificate tls_cert_;
    std::unique_ptr<Listener> listener_;
    std::mutex conn_mu_;
    std::set<Pipe*> active_pipes_;  // closed by stop() to unblock workers
    std::thread accept_thread_;
    std::vector<std::thread> workers_;
    std::atomic<bool> running_{false};
    std::uint16_t port_ = 0;
};

// Client half of the Provider wire API. One persistent channel; not
// thread-safe, one client per protocol session.
class ProviderClient {
public:
    static Result<std::unique_ptr<ProviderClient>> connect(Network& network,
                                                           const std::string& ip,
                                                           std::uint16_t port,
                                                           const ChannelConfig& config);

    Result<crypto::Certificate> issue_cert(const std::string& subject_id,
                                           const crypto::PublicKey& subject_public);
    Result<crypto::PublicKey> provider_public();
    Result<void> register_user(const std::string& user_id, const std::string& password,
                               const crypto::Certificate& cert);
    Result<crypto::Signature> register_agent(const std::string& user_id,
                                             const std::string& password,
                                             const AgentSubmission& submission);
    Result<ContactGrant> resolve_contact(const AgentId& receiver);
    Result<void> update_policy(const std::string& user_id, const std::string& password,
                               const AgentId& agent_id, const ContactPolicy& policy);
    Result<void> reset_counter(const std::string& user_id, const std::string& password,
                               const AgentId& agent_id, const AgentId& initiator);
    Result<void> refresh_otks(const std::string& user_id, const std::string& password,
                              const AgentId& agent_id, const std::vector<SignedOtk>& otks);
    Result<void> deactivate_agent(const std::string& user_id, const std::string& password,
                                  const AgentId& agent_id);
    Result<std::string> dump();

private:
    explicit ProviderClient(std::unique_ptr<SecureChannel> channel)
        : channel_(std::move(channel)) {}

    Result<std::string> call(const std::string& request_json);

    std::unique_ptr<SecureChannel> channel_;
};

// Convenience for clients that have no CA-signed certificate yet (user
// registration bootstrap): a self-signed placeholder identity.
ChannelConfig self_signed_channel_config(const std::string& subject_id,
                                         const crypto::PublicKey& trusted_ca);

}  // namespace pact
