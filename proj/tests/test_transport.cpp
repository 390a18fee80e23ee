#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <future>
#include <thread>

#include "doctest.h"
#include "pact/provider.hpp"
#include "pact/transport.hpp"

using namespace pact;

namespace {

struct Party {
    crypto::SigningKeyPair keys = crypto::keygen_sign();
    crypto::Certificate cert;

    Party(const CertificateAuthority& ca, const std::string& id) {
        cert = ca.issue(id, keys.public_key);
    }

    ChannelConfig config(const crypto::PublicKey& ca_public) const {
        ChannelConfig c;
        c.local_cert = cert;
        c.local_secret = keys.secret_key;
        c.trusted_ca = ca_public;
        return c;
    }
};

// Every byte-stream transport must pass the same channel conformance checks.
// `listen_port` is 0 for TCP (ephemeral); the in-memory bus has no ephemeral
// ports, so its callers pass a fixed one.
void run_conformance(Network& net, const std::string& ip, std::uint16_t listen_port) {
    CertificateAuthority ca;
    Party server(ca, "server@x.com:svc");
    Party client(ca, "client@x.com:app");

    auto listener = net.listen(ip, listen_port);
    REQUIRE(listener.ok());
    std::uint16_t port = (*listener)->port();
    if (port == 0) port = listen_port;

    auto serve = [&](bool expect_ok) {
        return std::async(std::launch::async,
                          [&, expect_ok]() -> std::unique_ptr<SecureChannel> {
                              auto pipe = (*listener)->accept();
                              if (!pipe) return nullptr;
                              auto ch = SecureChannel::accept(std::move(*pipe),
                                                              server.config(ca.public_key()));
                              if (!expect_ok) return nullptr;
                              return ch ? std::move(*ch) : nullptr;
                          });
    };

    SUBCASE("mutual authentication and ordered delivery") {
        auto server_side = serve(true);
        auto pipe = net.connect(ip, port);
        REQUIRE(pipe.ok());
        auto ch = SecureChannel::connect(std::move(*pipe), client.config(ca.public_key()),
                                         "server@x.com:svc");
        REQUIRE(ch.ok());
        auto sch = server_side.get();
        REQUIRE(sch != nullptr);
        CHECK(sch->remote_id() == "client@x.com:app");
        CHECK(sch->remote_verified());
        CHECK((*ch)->remote_id() == "server@x.com:svc");

        // 1000 frames in order, echoed back.
        auto echo = std::async(std::launch::async, [&] {
            for (int i = 0; i < 1000; ++i) {
                auto f = sch->recv();
                if (!f) return false;
                if (auto s = sch->send(*f); !s) return false;
            }
            return true;
        });
        for (int i = 0; i < 1000; ++i) {
            Frame f{FrameType::AppRequest, {}, to_bytes("seq " + std::to_string(i))};
            REQUIRE((*ch)->send(f).ok());
            auto back = (*ch)->recv();
            REQUIRE(back.ok());
            CHECK(back->payload == f.payload);
        }
        CHECK(echo.get());
    }

    SUBCASE("frames with tokens and large payloads survive") {
        auto server_side = serve(true);
        auto pipe = net.connect(ip, port);
        REQUIRE(pipe.ok());
        auto ch = SecureChannel::connect(std::move(*pipe), client.config(ca.public_key()),
                                         "server@x.com:svc");
        REQUIRE(ch.ok());
        auto sch = server_side.get();
        REQUIRE(sch != nullptr);

        Frame f{FrameType::AppRequest, crypto::random_bytes(200),
                crypto::random_bytes(100000)};
        REQUIRE((*ch)->send(f).ok());
        auto got = sch->recv();
        REQUIRE(got.ok());
        CHECK(*got == f);
    }

    SUBCASE("wrong expected identity aborts the client side") {
        auto server_side = serve(true);
        auto pipe = net.connect(ip, port);
        REQUIRE(pipe.ok());
        auto ch = SecureChannel::connect(std::move(*pipe), client.config(ca.public_key()),
                                         "someone@else.com:svc");
        CHECK_FALSE(ch.ok());
        server_side.wait();
    }

    SUBCASE("a certificate from a different authority is rejected") {
        auto server_side = serve(false);
        CertificateAuthority rogue;
        Party intruder(rogue, "intruder@x.com:app");
        auto pipe = net.connect(ip, port);
        REQUIRE(pipe.ok());
        auto cfg = intruder.config(ca.public_key());  // trusts the real CA
        auto ch = SecureChannel::connect(std::move(*pipe), cfg, "server@x.com:svc");
        CHECK_FALSE(ch.ok());
        server_side.wait();
    }

    (*listener)->close();
}

}  // namespace

TEST_CASE("frame encoding roundtrips") {
    Frame f{FrameType::TokenResponse, crypto::random_bytes(48), to_bytes("payload")};
    auto decoded = decode_frame(encode_frame(f));
    REQUIRE(decoded.ok());
    CHECK(*decoded == f);

    Frame empty{FrameType::Handshake, {}, {}};
    auto d2 = decode_frame(encode_frame(empty));
    REQUIRE(d2.ok());
    CHECK(*d2 == empty);

    CHECK_FALSE(decode_frame({}).ok());
    CHECK_FALSE(decode_frame({0x00, 0x00, 0x00}).ok());       // type 0
    CHECK_FALSE(decode_frame({0x01, 0x00, 0x05, 0x01}).ok()); // token overrun
}

TEST_CASE("rtt sampling reproduces the distribution mean") {
    std::mt19937_64 rng(99);
    RttDistribution dist{{10.0, 0.5}, {30.0, 0.5}};
    double sum = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        auto s = sample_rtt(dist, rng);
        REQUIRE(s.ok());
        sum += *s;
    }
    double mean = sum / n;
    CHECK(mean > 19.5);
    CHECK(mean < 20.5);

    CHECK_FALSE(sample_rtt({}, rng).ok());
    CHECK_FALSE(sample_rtt({{10.0, 0.0}}, rng).ok());
}

TEST_CASE("rtt sampling is deterministic for a fixed seed") {
    RttDistribution dist{{5.0, 1.0}, {50.0, 2.0}, {500.0, 1.0}};
    std::mt19937_64 a(7), b(7);
    for (int i = 0; i < 1000; ++i) CHECK(*sample_rtt(dist, a) == *sample_rtt(dist, b));
}

TEST_CASE("secure channel conformance over the in-memory bus") {
    SimulatedNetwork net;
    run_conformance(net, "10.0.0.1", 4040);
}

TEST_CASE("secure channel conformance over TCP loopback") {
    TcpNetwork net;
    run_conformance(net, "127.0.0.1", 0);
}

TEST_CASE("in-flight corruption aborts the channel before delivery") {
    SimulatedNetwork net;
    CertificateAuthority ca;
    Party server(ca, "s@x.com:svc");
    Party client(ca, "c@x.com:app");
    auto listener = net.listen("10.0.0.1", 4041);
    REQUIRE(listener.ok());
    auto server_side = std::async(std::launch::async, [&] {
        auto pipe = (*listener)->accept();
        auto ch = SecureChannel::accept(std::move(*pipe), server.config(ca.public_key()));
        REQUIRE(ch.ok());
        auto frame = (*ch)->recv();
        CHECK_FALSE(frame.ok());
        CHECK(frame.error().code == ErrorCode::Tamper);
        // The channel refuses further use after an integrity failure.
        CHECK_FALSE((*ch)->recv().ok());
    });
    auto pipe = net.connect("10.0.0.1", 4041);
    REQUIRE(pipe.ok());
    auto ch = SecureChannel::connect(std::move(*pipe), client.config(ca.public_key()),
                                     "s@x.com:svc");
    REQUIRE(ch.ok());
    net.arm_tamper();
    CHECK((*ch)->send(Frame{FrameType::AppRequest, {}, to_bytes("x")}).ok());
    server_side.wait();
}

TEST_CASE("the frame tap observes plaintext on both directions") {
    SimulatedNetwork net;
    CertificateAuthority ca;
    Party server(ca, "s@x.com:svc");
    Party client(ca, "c@x.com:app");
    std::vector<Frame> seen;
    auto listener = net.listen("10.0.0.1", 4042);
    REQUIRE(listener.ok());
    auto server_side = std::async(std::launch::async, [&] {
        auto pipe = (*listener)->accept();
        auto cfg = server.config(ca.public_key());
        cfg.frame_tap = [&](const Frame& f) { seen.push_back(f); };
        auto ch = SecureChannel::accept(std::move(*pipe), cfg);
        REQUIRE(ch.ok());
        auto f = (*ch)->recv();
        REQUIRE(f.ok());
        REQUIRE((*ch)->send(Frame{FrameType::AppResponse, {}, to_bytes("pong")}).ok());
    });
    auto pipe = net.connect("10.0.0.1", 4042);
    auto ch = SecureChannel::connect(std::move(*pipe), client.config(ca.public_key()),
                                     "s@x.com:svc");
    REQUIRE(ch.ok());
    REQUIRE((*ch)->send(Frame{FrameType::AppRequest, {}, to_bytes("ping")}).ok());
    auto reply = (*ch)->recv();
    REQUIRE(reply.ok());
    server_side.wait();
    REQUIRE(seen.size() == 2);
    CHECK(seen[0].payload == to_bytes("ping"));
    CHECK(seen[1].payload == to_bytes("pong"));
}

TEST_CASE("simulated listener rejects a port already in use") {
    SimulatedNetwork net;
    auto first = net.listen("10.0.0.1", 5000);
    REQUIRE(first.ok());
    auto second = net.listen("10.0.0.1", 5000);
    CHECK_FALSE(second.ok());
    CHECK(second.code() == ErrorCode::Conflict);
}

TEST_CASE("tcp listener rejects a port already in use") {
    TcpNetwork net;
    auto first = net.listen("127.0.0.1", 0);
    REQUIRE(first.ok());
    auto second = net.listen("127.0.0.1", (*first)->port());
    CHECK_FALSE(second.ok());
}
