#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pact/bytes.hpp"
#include "pact/crypto.hpp"
#include "pact/errors.hpp"
#include "pact/policy.hpp"

namespace pact {

// Network binding of an agent: globally unique across the registry.
struct EndpointDescriptor {
    std::string device;
    std::string ip;
    std::uint16_t port = 0;

    std::string key() const { return ip + ":" + std::to_string(port); }
    bool operator==(const EndpointDescriptor&) const = default;
};

// A one-time public key plus the owner's signature over <aid, OTK>.
struct SignedOtk {
    crypto::ExchangePublicKey otk{};
    crypto::Signature owner_signature{};

    bool operator==(const SignedOtk&) const = default;
};

// Everything the user submits when registering an agent.
struct AgentSubmission {
    AgentId agent_id;
    EndpointDescriptor endpoint;
    ContactPolicy policy;
    crypto::Certificate tls_cert;            // crt_A
    crypto::ExchangePublicKey access_public{};  // PAC_A
    std::vector<SignedOtk> otks;
    crypto::Signature owner_signature{};     // over <aid, ED, PK_A, PAC, PK_Prov>
};

// What the Provider hands an initiator after a successful contact
// resolution: the receiver's verified coordinates plus one consumed OTK.
struct ContactGrant {
    crypto::Certificate owner_cert;          // crt_U1
    AgentId agent_id;
    EndpointDescriptor endpoint;
    crypto::Certificate tls_cert;            // crt_A
    crypto::ExchangePublicKey access_public{};  // PAC_A
    crypto::ExchangePublicKey otk{};
    crypto::Signature otk_signature{};
    crypto::Signature agent_signature{};     // sigma_A^U1
};

// The initiator's self-description presented to a receiver, attested by the
// Provider signature issued at registration.
struct InitiatorInfo {
    AgentId agent_id;
    crypto::Certificate tls_cert;            // crt_B
    EndpointDescriptor endpoint;
    crypto::ExchangePublicKey access_public{};  // PAC_B
    crypto::Signature owner_signature{};     // sigma_B^U2
};

// --- Canonical byte strings under signatures ---

// <aid, ED, PK_A, PAC_A, PK_Prov>, signed by the owner's user key.
Bytes agent_binding_tbs(const AgentId& aid, const EndpointDescriptor& ed,
                        const crypto::PublicKey& tls_public,
                        const crypto::ExchangePublicKey& access_public,
                        const crypto::PublicKey& provider_public);

// <aid, OTK>, signed by the owner's user key.
Bytes otk_binding_tbs(const AgentId& aid, const crypto::ExchangePublicKey& otk);

// <aid, crt_A, ED, PAC, sigma_A^U>, signed by the Provider.
Bytes provider_attestation_tbs(const AgentId& aid, const crypto::Certificate& tls_cert,
                               const EndpointDescriptor& ed,
                               const crypto::ExchangePublicKey& access_public,
                               const crypto::Signature& owner_signature);

// --- JSON (wire / journal) encodings ---

std::string endpoint_to_json(const EndpointDescriptor& ed);
std::string cert_to_json(const crypto::Certificate& cert);
std::string grant_to_json(const ContactGrant& grant);
std::string submission_to_json(const AgentSubmission& sub);
std::string initiator_info_to_json(const InitiatorInfo& info);

Result<EndpointDescriptor> endpoint_from_json(const std::string& text);
Result<crypto::Certificate> cert_from_json(const std::string& text);
Result<ContactGrant> grant_from_json(const std::string& text);
Result<AgentSubmission> submission_from_json(const std::string& text);
Result<InitiatorInfo> initiator_info_from_json(const std::string& text);

}  // namespace pact
