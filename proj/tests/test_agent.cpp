#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <mutex>

#include "doctest.h"
#include "pact/agent.hpp"
#include "pact/provider.hpp"

using namespace pact;

namespace {

constexpr char kPassword[] = "correct horse battery staple";

struct UserAccount {
    std::string id;
    crypto::SigningKeyPair keys;
    crypto::Certificate cert;
};

// Provider plus a receiving agent (alice) and an initiating agent (bob),
// all on one in-memory bus.
struct Env {
    CertificateAuthority ca;
    crypto::SigningKeyPair provider_keys = crypto::keygen_sign();
    Registry registry{provider_keys, ca.public_key(), std::make_shared<DenylistVerifier>(),
                      std::make_shared<MemoryJournal>(), RegistryConfig{false, {}}};
    ProviderService service{registry, ca, crypto::keygen_sign()};
    SimulatedNetwork net;

    UserAccount alice_u, bob_u;
    AgentIdentity alice, bob;
    std::unique_ptr<AgentRuntime> alice_rt;
    // Added to the receiver's clock; lets tests age tokens without waiting.
    std::shared_ptr<std::atomic<std::int64_t>> receiver_skew =
        std::make_shared<std::atomic<std::int64_t>>(0);

    // Secret material that must never appear on the wire.
    std::vector<Bytes> secrets;

    explicit Env(TokenParams params = {600, 10}, int peer_budget = 50,
                 std::size_t receiver_otks = 16,
                 std::function<void(const Frame&)> receiver_tap = {}) {
        REQUIRE(service.start(net, "10.0.0.9", 9000).ok());
        make_user(alice_u, "alice@example.com");
        make_user(bob_u, "bob@example.com");
        setup_agent(alice, alice_u, "assistant", "10.0.0.1", 7001,
                    ContactPolicy{{{"bob@example.com:*", peer_budget}}}, receiver_otks);
        setup_agent(bob, bob_u, "scheduler", "10.0.0.2", 7002, {}, 2);

        AgentRuntimeConfig cfg;
        cfg.token_params = params;
        cfg.provider_public = registry.provider_public();
        cfg.ca_public = ca.public_key();
        cfg.clock = [skew = receiver_skew] { return system_clock_seconds() + skew->load(); };
        cfg.frame_tap = std::move(receiver_tap);
        alice_rt = std::make_unique<AgentRuntime>(alice, cfg, make_echo_handler());
        REQUIRE(alice_rt->start(net).ok());
    }

    ~Env() {
        if (alice_rt) alice_rt->stop();
        service.stop();
    }

    void make_user(UserAccount& user, const std::string& id) {
        user.id = id;
        user.keys = crypto::keygen_sign();
        user.cert = ca.issue(id, user.keys.public_key);
        REQUIRE(registry.register_user(id, kPassword, user.cert).ok());
        // Seed half of an Ed25519 secret; the public half legitimately
        // travels inside certificates.
        secrets.push_back(Bytes(user.keys.secret_key.begin(),
                                user.keys.secret_key.begin() + 32));
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
        REQUIRE(sig.ok());
        agent.provider_signature = *sig;
        for (const auto& pair : material.otk_pairs) {
            agent.otk_store.add(pair.public_key, pair.secret_key);
            secrets.push_back(Bytes(pair.secret_key.begin(), pair.secret_key.end()));
        }
        secrets.push_back(Bytes(agent.access_keys.secret_key.begin(),
                                agent.access_keys.secret_key.end()));
        secrets.push_back(Bytes(agent.tls_keys.secret_key.begin(),
                                agent.tls_keys.secret_key.begin() + 32));
    }

    ChannelConfig channel_config(const AgentIdentity& agent) const {
        ChannelConfig cfg;
        cfg.local_cert = agent.tls_cert;
        cfg.local_secret = agent.tls_keys.secret_key;
        cfg.trusted_ca = ca.public_key();
        return cfg;
    }

    std::unique_ptr<ProviderClient> client_for(const AgentIdentity& agent) {
        auto c = ProviderClient::connect(net, "10.0.0.9", 9000, channel_config(agent));
        REQUIRE(c.ok());
        return std::move(*c);
    }
};

bool contains(const Bytes& haystack, const Bytes& needle) {
    return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
           haystack.end();
}

}  // namespace

TEST_CASE("registration material carries valid owner signatures") {
    CertificateAuthority ca;
    auto owner = crypto::keygen_sign();
    auto provider = crypto::keygen_sign();
    auto aid = *AgentId::parse("alice@example.com:assistant");
    EndpointDescriptor ep{"sim", "10.0.0.1", 7001};
    auto tls = crypto::keygen_sign();
    auto cert = ca.issue(aid.str(), tls.public_key);
    auto access = crypto::keygen_exchange();

    auto material = prepare_registration(owner.secret_key, aid, ep, ContactPolicy{{}}, tls,
                                         cert, access, provider.public_key, 12);
    const auto& sub = material.submission;
    CHECK(sub.otks.size() == 12);
    CHECK(material.otk_pairs.size() == 12);

    auto binding = agent_binding_tbs(aid, ep, tls.public_key, access.public_key,
                                     provider.public_key);
    CHECK(crypto::verify(owner.public_key, binding, sub.owner_signature));
    for (std::size_t i = 0; i < sub.otks.size(); ++i) {
        CHECK(sub.otks[i].otk == material.otk_pairs[i].public_key);
        CHECK(crypto::verify(owner.public_key, otk_binding_tbs(aid, sub.otks[i].otk),
                             sub.otks[i].owner_signature));
    }
}

TEST_CASE("the initiator completes requests and amortizes provider cycles") {
    Env env(TokenParams{600, 10});
    auto client = env.client_for(env.bob);
    InitiatorConfig icfg;
    icfg.provider_public = env.registry.provider_public();
    icfg.ca_public = env.ca.public_key();
    Initiator initiator(env.bob, icfg, *client, env.net);

    for (int i = 0; i < 25; ++i) {
        auto reply = initiator.send_request(env.alice.agent_id,
                                            to_bytes("hello " + std::to_string(i)));
        REQUIRE(reply.ok());
        CHECK(to_string(*reply) == "hello " + std::to_string(i));
    }
    // 25 requests at 10 per token: exactly 3 resolve cycles, 3 keys consumed.
    CHECK(initiator.resolve_cycles() == 3);
    CHECK(env.registry.unconsumed_otk_count(env.alice.agent_id) == 13);
    CHECK(env.alice_rt->handler_invocations() == 25);
    // One ledger entry per cycle; exhausted tokens stay until released.
    CHECK(env.alice_rt->ledger().live_count() == 3);
}

TEST_CASE("releasing a token forces a fresh cycle on the next request") {
    Env env(TokenParams{600, 10});
    auto client = env.client_for(env.bob);
    InitiatorConfig icfg;
    icfg.provider_public = env.registry.provider_public();
    icfg.ca_public = env.ca.public_key();
    Initiator initiator(env.bob, icfg, *client, env.net);

    REQUIRE(initiator.send_request(env.alice.agent_id, to_bytes("one")).ok());
    CHECK(initiator.resolve_cycles() == 1);
    CHECK(env.alice_rt->ledger().live_count() == 1);

    REQUIRE(initiator.release_token(env.alice.agent_id).ok());
    CHECK(env.alice_rt->ledger().live_count() == 0);

    REQUIRE(initiator.send_request(env.alice.agent_id, to_bytes("two")).ok());
    CHECK(initiator.resolve_cycles() == 2);
    CHECK(env.registry.unconsumed_otk_count(env.alice.agent_id) == 14);
}

TEST_CASE("an expired cached token recovers through one retry") {
    Env env(TokenParams{600, 10});
    auto client = env.client_for(env.bob);
    InitiatorConfig icfg;
    icfg.provider_public = env.registry.provider_public();
    icfg.ca_public = env.ca.public_key();
    Initiator initiator(env.bob, icfg, *client, env.net);

    REQUIRE(initiator.send_request(env.alice.agent_id, to_bytes("first")).ok());
    CHECK(initiator.resolve_cycles() == 1);

    // Age the receiver past the token's lifetime and grace. The initiator's
    // own clock still considers the cached token fresh, so its next request
    // is rejected as expired and silently retried through a new cycle.
    env.receiver_skew->store(600 + kExpirySkewGraceSeconds + 60);
    auto reply = initiator.send_request(env.alice.agent_id, to_bytes("second"));
    REQUIRE(reply.ok());
    CHECK(to_string(*reply) == "second");
    CHECK(initiator.resolve_cycles() == 2);
}

TEST_CASE("grant verification rejects every corrupted field") {
    Env env;
    auto client = env.client_for(env.bob);
    auto grant = client->resolve_contact(env.alice.agent_id);
    REQUIRE(grant.ok());
    const auto& ca_pub = env.ca.public_key();
    const auto& prov_pub = env.registry.provider_public();
    REQUIRE(verify_grant(*grant, ca_pub, prov_pub).ok());

    auto g = *grant;
    g.owner_cert.subject_id = "mallory@example.com";
    CHECK_FALSE(verify_grant(g, ca_pub, prov_pub).ok());

    g = *grant;
    g.endpoint.port += 1;
    CHECK_FALSE(verify_grant(g, ca_pub, prov_pub).ok());

    g = *grant;
    g.access_public = crypto::keygen_exchange().public_key;
    CHECK_FALSE(verify_grant(g, ca_pub, prov_pub).ok());

    g = *grant;
    g.otk = crypto::keygen_exchange().public_key;
    CHECK_FALSE(verify_grant(g, ca_pub, prov_pub).ok());

    g = *grant;
    g.otk_signature[0] ^= 1;
    CHECK_FALSE(verify_grant(g, ca_pub, prov_pub).ok());

    g = *grant;
    g.tls_cert = env.bob.tls_cert;  // someone else's channel certificate
    CHECK_FALSE(verify_grant(g, ca_pub, prov_pub).ok());

    // A different trust root rejects the whole grant.
    CHECK_FALSE(verify_grant(*grant, crypto::keygen_sign().public_key, prov_pub).ok());
}

TEST_CASE("initiator verification rejects an attestation from elsewhere") {
    Env env;
    GuardToggles toggles;
    auto info = env.bob.initiator_info();
    auto pac = verify_initiator(info, env.bob.provider_signature, env.bob.agent_id.str(),
                                true, env.ca.public_key(), env.registry.provider_public(),
                                toggles);
    REQUIRE(pac.ok());
    CHECK(*pac == env.bob.access_keys.public_key);

    // Identity presented over someone else's channel.
    auto wrong_channel =
        verify_initiator(info, env.bob.provider_signature, env.alice.agent_id.str(), true,
                         env.ca.public_key(), env.registry.provider_public(), toggles);
    CHECK_FALSE(wrong_channel.ok());

    // Substituted access key breaks the provider attestation.
    auto forged = info;
    forged.access_public = crypto::keygen_exchange().public_key;
    auto bad = verify_initiator(forged, env.bob.provider_signature, env.bob.agent_id.str(),
                                true, env.ca.public_key(), env.registry.provider_public(),
                                toggles);
    CHECK_FALSE(bad.ok());
    CHECK(bad.code() == ErrorCode::BadSignature);
}

TEST_CASE("no long-term or one-time secret ever crosses the wire") {
    std::mutex mu;
    std::vector<Frame> frames;
    auto tap = [&](const Frame& f) {
        std::lock_guard lk(mu);
        frames.push_back(f);
    };
    Env env(TokenParams{600, 5}, 50, 16, tap);
    auto client = env.client_for(env.bob);
    InitiatorConfig icfg;
    icfg.provider_public = env.registry.provider_public();
    icfg.ca_public = env.ca.public_key();
    Initiator initiator(env.bob, icfg, *client, env.net);
    for (int i = 0; i < 12; ++i) {
        REQUIRE(initiator.send_request(env.alice.agent_id, to_bytes("payload")).ok());
    }
    REQUIRE(initiator.release_token(env.alice.agent_id).ok());

    Bytes wire;
    {
        std::lock_guard lk(mu);
        REQUIRE(frames.size() > 0);
        for (const auto& f : frames) {
            wire.insert(wire.end(), f.token.begin(), f.token.end());
            wire.insert(wire.end(), f.payload.begin(), f.payload.end());
        }
    }
    for (const auto& secret : env.secrets) {
        CHECK_FALSE(contains(wire, secret));
    }
}
