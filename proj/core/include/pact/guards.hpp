#pragma once

namespace pact {

// Every protocol check the attack harness exercises, individually
// toggleable. Production paths use the defaults; the harness's mutation mode
// flips one off to prove the corresponding scenario is load-bearing.
struct GuardToggles {
    bool verify_peer_certificate = true;    // channel handshake (A1)
    bool require_access_credential = true;  // OTK-or-token gate at receiver (A2)
    bool check_token_expiry = true;         // token validation (A3)
    bool verify_provider_signature = true;  // initiator info attestation (A4)
    bool check_token_holder = true;         // token-to-PAC binding (A5)
    bool enforce_contact_policy = true;     // provider-side budget check (A6)
    bool require_human_verification = true; // user registration gate (A7)
    bool enforce_token_quota = true;        // per-token request bound (A8)
};

}  // namespace pact
