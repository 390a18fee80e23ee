#include "pact/harness.hpp"

#include <atomic>
#include <chrono>
#include <memory>
#include <stdexcept>

#include "json.hpp"
#include "pact/agent.hpp"
#include "pact/provider.hpp"
#include "pact/registry.hpp"
#include "pact/transport.hpp"

namespace pact::harness {

using nlohmann::json;

namespace {

constexpr char kStepRegistration5[] = "registration step 5";
constexpr char kStepContact2[] = "communication step 2";
constexpr char kStepContact4[] = "communication step 4";
constexpr char kStepContact6[] = "communication step 6";
constexpr char kStepContact8[] = "communication step 8";

constexpr char kPassword[] = "correct horse battery staple";

struct UserAccount {
    std::string id;
    crypto::SigningKeyPair keys;
    crypto::Certificate cert;
};

struct EnvOptions {
    GuardToggles toggles;
    TokenParams params;
    std::size_t receiver_otks = 8;
    int peer_budget = 50;
    RttDistribution provider_rtt;
    std::uint64_t seed = 0;
};

// Self-contained deployment: one Provider, a receiving agent (alice's
// assistant), a legitimate initiator (bob's scheduler) and a registered but
// unwelcome third party (mallory's intruder, matched by no policy rule).
struct Env {
    EnvOptions opts;
    CertificateAuthority ca;
    crypto::SigningKeyPair provider_keys = crypto::keygen_sign();
    std::shared_ptr<DenylistVerifier> verifier = std::make_shared<DenylistVerifier>();
    Registry registry;
    ProviderService service;
    SimulatedNetwork provider_net;
    SimulatedNetwork agent_net;
    std::shared_ptr<std::atomic<std::int64_t>> clock_skew =
        std::make_shared<std::atomic<std::int64_t>>(0);

    UserAccount alice_u, bob_u, mallory_u;
    AgentIdentity alice, bob, mallory;
    std::unique_ptr<AgentRuntime> alice_rt;

    explicit Env(EnvOptions options)
        : opts(options),
          registry(provider_keys, ca.public_key(), verifier, nullptr,
                   RegistryConfig{false, options.toggles}),
          service(registry, ca, crypto::keygen_sign()) {
        verifier->deny("replicant@bots.example");
        if (!opts.provider_rtt.empty()) {
            provider_net.set_rtt(opts.provider_rtt, opts.seed);
        }
        auto started = service.start(provider_net, "provider", 1);
        if (!started) throw std::runtime_error(started.error().message);

        make_user(alice_u, "alice@example.com");
        make_user(bob_u, "bob@example.com");
        make_user(mallory_u, "mallory@outside.net");

        ContactPolicy alice_policy{{{"bob@example.com:*", opts.peer_budget}}};
        setup_agent(alice, alice_u, "assistant", "10.0.0.1", 7001, alice_policy,
                    opts.receiver_otks);
        setup_agent(bob, bob_u, "scheduler", "10.0.0.2", 7002, {}, 2);
        setup_agent(mallory, mallory_u, "intruder", "10.0.0.3", 7003, {}, 2);

        AgentRuntimeConfig cfg;
        cfg.token_params = opts.params;
        cfg.toggles = opts.toggles;
        cfg.provider_public = registry.provider_public();
        cfg.ca_public = ca.public_key();
        cfg.clock = [skew = clock_skew] { return system_clock_seconds() + skew->load(); };
        alice_rt = std::make_unique<AgentRuntime>(alice, cfg, make_echo_handler());
        auto serving = alice_rt->start(agent_net);
        if (!serving) throw std::runtime_error(serving.error().message);
    }

    ~Env() {
        if (alice_rt) alice_rt->stop();
        service.stop();
    }

    void make_user(UserAccount& user, const std::string& id) {
        user.id = id;
        user.keys = crypto::keygen_sign();
        user.cert = ca.issue(id, user.keys.public_key);
        auto r = registry.register_user(id, kPassword, user.cert);
        if (!r) throw std::runtime_error(r.error().message);
    }

    void setup_agent(AgentIdentity& agent, const UserAccount& owner, const std::string& name,
                     const std::string& ip, std::uint16_t port, const ContactPolicy& policy,
                     std::size_t otks) {
        agent.agent_id = AgentId{owner.id, name};
        agent.endpoint = EndpointDescriptor{"sim", ip, port};
        agent.tls_keys = crypto::keygen_sign();
        agent.tls_cert = ca.issue(agent.agent_id.str(), agent.tls_keys.public_key);
        agent.access_keys = crypto::keygen_exchange();
        agent.owner_cert = owner.cert;
        auto material = prepare_registration(owner.keys.secret_key, agent.agent_id,
                                             agent.endpoint, policy, agent.tls_keys,
                                             agent.tls_cert, agent.access_keys,
                                             registry.provider_public(), otks);
        agent.owner_signature = material.submission.owner_signature;
        auto sig = registry.register_agent(owner.id, kPassword, material.submission);
        if (!sig) throw std::runtime_error(sig.error().message);
        agent.provider_signature = *sig;
        for (const auto& pair : material.otk_pairs) {
            agent.otk_store.add(pair.public_key, pair.secret_key);
        }
    }

    ChannelConfig channel_config(const AgentIdentity& agent) const {
        ChannelConfig cfg;
        cfg.local_cert = agent.tls_cert;
        cfg.local_secret = agent.tls_keys.secret_key;
        cfg.trusted_ca = ca.public_key();
        return cfg;
    }

    Result<std::unique_ptr<ProviderClient>> client_for(const AgentIdentity& agent) {
        return ProviderClient::connect(provider_net, "provider", 1, channel_config(agent));
    }
};

Result<Frame> rpc(SecureChannel& channel, const Frame& frame) {
    if (auto s = channel.send(frame); !s) return s.error();
    return channel.recv();
}

// Low-level protocol driver for adversarial sequences the Initiator class
// refuses to produce.
struct ManualSession {
    std::unique_ptr<SecureChannel> channel;

    Result<void> identify(const InitiatorInfo& info, const crypto::Signature& provider_sig) {
        json payload = {
            {"initiator_info", json::parse(initiator_info_to_json(info))},
            {"provider_signature", hex_encode(provider_sig)},
        };
        auto reply = rpc(*channel, Frame{FrameType::Handshake, {}, to_bytes(payload.dump())});
        if (!reply) return reply.error();
        if (reply->type != FrameType::Handshake) {
            auto j = json::parse(to_string(reply->payload), nullptr, false);
            auto code = error_code_from_name(j.is_object() ? j.value("code", "") : "");
            return Error{code.value_or(ErrorCode::Internal),
                         j.is_object() ? j.value("message", "identify rejected")
                                       : "identify rejected"};
        }
        return {};
    }

    Result<AccessToken> request_token(const crypto::ExchangePublicKey& otk) {
        json payload = {{"op", "issue"}, {"otk", hex_encode(otk)}};
        auto reply =
            rpc(*channel, Frame{FrameType::TokenRequest, {}, to_bytes(payload.dump())});
        if (!reply) return reply.error();
        AccessToken token;
        auto j = json::parse(to_string(reply->payload), nullptr, false);
        if (reply->type != FrameType::TokenResponse || j.is_discarded() ||
            !hex_decode(j.value("token", ""), token.ciphertext)) {
            return Error{ErrorCode::AuthFailed,
                         j.is_object() ? j.value("message", "token refused") : "token refused"};
        }
        return token;
    }

    // Returns the raw reply frame so callers can inspect rejections.
    Result<Frame> app_request(const Bytes& token, const Bytes& payload) {
        return rpc(*channel, Frame{FrameType::AppRequest, token, payload});
    }
};

Result<ManualSession> open_session(Env& env, const AgentIdentity& self,
                                   const AgentIdentity& peer) {
    auto pipe = env.agent_net.connect(peer.endpoint.ip, peer.endpoint.port);
    if (!pipe) return pipe.error();
    auto channel = SecureChannel::connect(std::move(*pipe), env.channel_config(self),
                                          peer.agent_id.str());
    if (!channel) return channel.error();
    ManualSession session;
    session.channel = std::move(*channel);
    return session;
}

// Full legitimate handshake for bob, returning the session plus the token.
struct TokenedSession {
    ManualSession session;
    AccessToken token;
};

Result<TokenedSession> bob_obtains_token(Env& env) {
    auto client = env.client_for(env.bob);
    if (!client) return client.error();
    auto grant = (*client)->resolve_contact(env.alice.agent_id);
    if (!grant) return grant.error();
    if (auto v = verify_grant(*grant, env.ca.public_key(), env.registry.provider_public());
        !v)
        return v.error();
    auto session = open_session(env, env.bob, env.alice);
    if (!session) return session.error();
    if (auto id = session->identify(env.bob.initiator_info(), env.bob.provider_signature);
        !id)
        return id.error();
    auto token = session->request_token(grant->otk);
    if (!token) return token.error();
    return TokenedSession{std::move(*session), *token};
}

AttackReport report(const std::string& scenario, const std::string& expected,
                    const std::string& detected, const std::string& detail, bool pass) {
    return AttackReport{scenario, detected, expected, detail, pass};
}

std::string reject_of(const Frame& frame) {
    auto j = json::parse(to_string(frame.payload), nullptr, false);
    if (j.is_object() && j.contains("reject")) return j["reject"].get<std::string>();
    if (j.is_object()) return j.value("code", "unknown");
    return "unknown";
}

// A1: adversary with no registered TLS credential attempts the channel
// handshake against the receiver.
AttackReport attack_a1(Env& env) {
    auto keys = crypto::keygen_sign();
    ChannelConfig cfg;
    cfg.local_cert = crypto::make_certificate(keys.secret_key, "intruder", keys.public_key);
    cfg.local_secret = keys.secret_key;
    cfg.trusted_ca = env.ca.public_key();
    auto pipe = env.agent_net.connect(env.alice.endpoint.ip, env.alice.endpoint.port);
    if (!pipe) return report("A1", kStepContact4, "setup", pipe.error().message, false);
    auto channel =
        SecureChannel::connect(std::move(*pipe), cfg, env.alice.agent_id.str());
    if (!channel) {
        return report("A1", kStepContact4, kStepContact4, channel.error().message, true);
    }
    return report("A1", kStepContact4, "none", "self-signed peer accepted", false);
}

// A2: a registered agent contacts the receiver but presents neither a
// one-time key nor a token with its request.
AttackReport attack_a2(Env& env) {
    auto session = open_session(env, env.mallory, env.alice);
    if (!session) return report("A2", kStepContact6, "setup", session.error().message, false);
    if (auto id = session->identify(env.mallory.initiator_info(),
                                    env.mallory.provider_signature);
        !id)
        return report("A2", kStepContact6, "setup", id.error().message, false);
    auto before = env.alice_rt->handler_invocations();
    auto reply = session->app_request({}, to_bytes("ping"));
    if (!reply) return report("A2", kStepContact6, "setup", reply.error().message, false);
    if (reply->type == FrameType::Error && env.alice_rt->handler_invocations() == before) {
        return report("A2", kStepContact6, kStepContact6, reject_of(*reply), true);
    }
    return report("A2", kStepContact6, "none", "request served without credential", false);
}

// A3: a once-valid token presented after its expiry (plus skew grace).
AttackReport attack_a3(Env& env) {
    auto ts = bob_obtains_token(env);
    if (!ts) return report("A3", kStepContact8, "setup", ts.error().message, false);
    env.clock_skew->store(env.opts.params.lifetime_seconds + kExpirySkewGraceSeconds + 60);
    auto before = env.alice_rt->handler_invocations();
    auto reply = ts->session.app_request(ts->token.ciphertext, to_bytes("late"));
    if (!reply) return report("A3", kStepContact8, "setup", reply.error().message, false);
    if (reply->type == FrameType::Error &&
        reject_of(*reply) == token_reject_name(TokenReject::Expired) &&
        env.alice_rt->handler_invocations() == before) {
        return report("A3", kStepContact8, kStepContact8, reject_of(*reply), true);
    }
    return report("A3", kStepContact8, "none", "expired token honored", false);
}

// A4: a registered agent identifies with attested metadata that does not
// match what the Provider signed (substituted access-control key).
AttackReport attack_a4(Env& env) {
    auto session = open_session(env, env.mallory, env.alice);
    if (!session) return report("A4", kStepContact6, "setup", session.error().message, false);
    auto forged = env.mallory.initiator_info();
    forged.access_public = crypto::keygen_exchange().public_key;
    auto id = session->identify(forged, env.mallory.provider_signature);
    if (!id && id.code() == ErrorCode::BadSignature) {
        return report("A4", kStepContact6, kStepContact6,
                      std::string(error_code_name(id.code())), true);
    }
    if (!id) return report("A4", kStepContact6, "setup", id.error().message, false);
    return report("A4", kStepContact6, "none", "mismatched attestation accepted", false);
}

// A5: a token stolen from bob, replayed by a different registered agent.
AttackReport attack_a5(Env& env) {
    auto ts = bob_obtains_token(env);
    if (!ts) return report("A5", kStepContact8, "setup", ts.error().message, false);
    auto thief = open_session(env, env.mallory, env.alice);
    if (!thief) return report("A5", kStepContact8, "setup", thief.error().message, false);
    if (auto id = thief->identify(env.mallory.initiator_info(),
                                  env.mallory.provider_signature);
        !id)
        return report("A5", kStepContact8, "setup", id.error().message, false);
    auto before = env.alice_rt->handler_invocations();
    auto reply = thief->app_request(ts->token.ciphertext, to_bytes("stolen"));
    if (!reply) return report("A5", kStepContact8, "setup", reply.error().message, false);
    if (reply->type == FrameType::Error &&
        reject_of(*reply) == token_reject_name(TokenReject::WrongHolder) &&
        env.alice_rt->handler_invocations() == before) {
        return report("A5", kStepContact8, kStepContact8, reject_of(*reply), true);
    }
    return report("A5", kStepContact8, "none", "stolen token honored", false);
}

// A6: contact resolution for an initiator the receiver's policy does not
// allow.
AttackReport attack_a6(Env& env) {
    auto client = env.client_for(env.mallory);
    if (!client) return report("A6", kStepContact2, "setup", client.error().message, false);
    auto grant = (*client)->resolve_contact(env.alice.agent_id);
    if (!grant && grant.code() == ErrorCode::NotPermitted) {
        return report("A6", kStepContact2, kStepContact2,
                      std::string(error_code_name(grant.code())), true);
    }
    if (!grant) return report("A6", kStepContact2, "setup", grant.error().message, false);
    return report("A6", kStepContact2, "none", "policy-blocked initiator got a grant", false);
}

// A7: registration attempt by an identity that fails human verification.
AttackReport attack_a7(Env& env) {
    auto keys = crypto::keygen_sign();
    auto cert = env.ca.issue("replicant@bots.example", keys.public_key);
    auto r = env.registry.register_user("replicant@bots.example", kPassword, cert);
    if (!r && r.code() == ErrorCode::NotHuman) {
        return report("A7", kStepRegistration5, kStepRegistration5,
                      std::string(error_code_name(r.code())), true);
    }
    if (!r) return report("A7", kStepRegistration5, "setup", r.error().message, false);
    return report("A7", kStepRegistration5, "none", "unverified identity registered", false);
}

// A8: a compromised-but-tokened agent pushes as many requests as it can
// through one token. Pass criterion is the bound, not a rejection.
AttackReport attack_a8(Env& env) {
    auto ts = bob_obtains_token(env);
    if (!ts) return report("A8", kStepContact8, "setup", ts.error().message, false);
    const std::uint32_t quota = env.opts.params.max_requests;
    const std::uint32_t attempts = quota * 3;
    std::uint32_t accepted = 0;
    std::string first_reject;
    for (std::uint32_t i = 0; i < attempts; ++i) {
        auto reply = ts->session.app_request(ts->token.ciphertext, to_bytes("spam"));
        if (!reply) return report("A8", kStepContact8, "setup", reply.error().message, false);
        if (reply->type == FrameType::AppResponse) {
            ++accepted;
        } else if (first_reject.empty()) {
            first_reject = reject_of(*reply);
        }
    }
    std::string detail = "accepted " + std::to_string(accepted) + " of " +
                         std::to_string(attempts) + " requests (quota " +
                         std::to_string(quota) + ", first rejection " +
                         (first_reject.empty() ? "none" : first_reject) + ")";
    bool pass = accepted == quota &&
                first_reject == token_reject_name(TokenReject::QuotaExceeded);
    return report("A8", kStepContact8, pass ? kStepContact8 : "none", detail, pass);
}

}  // namespace

AttackReport run_attack(const std::string& scenario, const GuardToggles& toggles,
                        std::uint64_t seed) {
    EnvOptions opts;
    opts.toggles = toggles;
    opts.seed = seed;
    try {
        Env env(opts);
        if (scenario == "A1") return attack_a1(env);
        if (scenario == "A2") return attack_a2(env);
        if (scenario == "A3") return attack_a3(env);
        if (scenario == "A4") return attack_a4(env);
        if (scenario == "A5") return attack_a5(env);
        if (scenario == "A6") return attack_a6(env);
        if (scenario == "A7") return attack_a7(env);
        if (scenario == "A8") return attack_a8(env);
    } catch (const std::exception& e) {
        return AttackReport{scenario, "setup", "setup", e.what(), false};
    }
    return AttackReport{scenario, "", "", "unknown scenario: " + scenario, false};
}

std::string report_to_json(const AttackReport& r) {
    return json{{"scenario", r.scenario},
                {"detected_at_step", r.detected_at_step},
                {"expected_step", r.expected_step},
                {"detail", r.detail},
                {"pass", r.pass}}
        .dump();
}

Result<OverheadResult> protocol_overhead(const OverheadModel& model) {
    if (model.q_max < 1 || model.m < 1) {
        return Error{ErrorCode::BadInput, "q_max and m must be at least 1"};
    }
    OverheadResult result;
    result.cycles = (model.m + model.q_max - 1) / model.q_max;
    result.total_ms = (model.rtt_ms + model.t_crypto_ms) * static_cast<double>(result.cycles);
    result.amortized_ms = result.total_ms / static_cast<double>(model.m);
    return result;
}

Result<MeasuredOverhead> measured_overhead(std::uint32_t q_max, std::uint32_t m,
                                           double rtt_ms, std::uint64_t seed) {
    if (q_max < 1 || m < 1) {
        return Error{ErrorCode::BadInput, "q_max and m must be at least 1"};
    }
    const std::uint64_t cycles = (m + q_max - 1) / q_max;

    EnvOptions opts;
    opts.params.lifetime_seconds = 3600;
    opts.params.max_requests = q_max;
    opts.receiver_otks = cycles + 2;
    opts.peer_budget = static_cast<int>(cycles + 2);
    opts.provider_rtt = {{rtt_ms, 1.0}};
    opts.seed = seed;

    try {
        Env env(opts);
        auto client = env.client_for(env.bob);
        if (!client) return client.error();
        InitiatorConfig icfg;
        icfg.provider_public = env.registry.provider_public();
        icfg.ca_public = env.ca.public_key();
        Initiator initiator(env.bob, icfg, **client, env.agent_net);

        auto start = std::chrono::steady_clock::now();
        for (std::uint32_t i = 0; i < m; ++i) {
            auto r = initiator.send_request(env.alice.agent_id, to_bytes("payload"));
            if (!r) return r.error();
        }
        auto elapsed = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                           .count();

        MeasuredOverhead out;
        out.measured_ms = elapsed;
        out.provider_cycles = initiator.resolve_cycles();
        out.requests = m;
        auto predicted = protocol_overhead(OverheadModel{rtt_ms, 7.0, q_max, m});
        out.predicted_ms = predicted ? predicted->total_ms : 0;
        return out;
    } catch (const std::exception& e) {
        return Error{ErrorCode::Internal, e.what()};
    }
}

double capacity(double throughput_per_minute, double lifetime_seconds) {
    return throughput_per_minute * (lifetime_seconds / 60.0);
}

Result<double> measure_provider_throughput(std::uint32_t iterations) {
    if (iterations < 1) return Error{ErrorCode::BadInput, "iterations must be at least 1"};
    CertificateAuthority ca;
    auto provider_keys = crypto::keygen_sign();
    Registry registry(provider_keys, ca.public_key(), nullptr, nullptr,
                      RegistryConfig{false, {}});

    auto owner_keys = crypto::keygen_sign();
    const std::string owner = "owner@example.com";
    if (auto r = registry.register_user(owner, kPassword, ca.issue(owner, owner_keys.public_key));
        !r)
        return r.error();

    AgentId receiver{owner, "assistant"};
    auto tls = crypto::keygen_sign();
    auto access = crypto::keygen_exchange();
    ContactPolicy policy{{{"*@example.com:*", static_cast<int>(iterations)}}};
    auto material = prepare_registration(
        owner_keys.secret_key, receiver, EndpointDescriptor{"bench", "10.0.0.1", 9100},
        policy, tls, ca.issue(receiver.str(), tls.public_key), access,
        registry.provider_public(), iterations);
    if (auto r = registry.register_agent(owner, kPassword, material.submission); !r)
        return r.error();

    AgentId initiator{"caller@example.com", "client"};
    auto start = std::chrono::steady_clock::now();
    for (std::uint32_t i = 0; i < iterations; ++i) {
        auto grant = registry.resolve_contact(initiator, receiver);
        if (!grant) return grant.error();
    }
    double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (seconds <= 0) seconds = 1e-9;
    return static_cast<double>(iterations) / seconds * 60.0;
}

}  // namespace pact::harness
