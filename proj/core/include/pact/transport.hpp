#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pact/bytes.hpp"
#include "pact/crypto.hpp"
#include "pact/errors.hpp"

namespace pact {

enum class FrameType : std::uint8_t {
    Handshake = 1,
    TokenRequest = 2,
    TokenResponse = 3,
    AppRequest = 4,
    AppResponse = 5,
    Error = 6,
};

// Application frame: 1-byte type, 2-byte token length, token, payload.
// Carried inside one encrypted channel record.
struct Frame {
    FrameType type = FrameType::Handshake;
    Bytes token;
    Bytes payload;

    bool operator==(const Frame&) const = default;
};

Bytes encode_frame(const Frame& frame);
Result<Frame> decode_frame(const Bytes& encoded);

// Reliable ordered byte stream; both the in-memory bus and TCP provide it.
class Pipe {
public:
    virtual ~Pipe() = default;
    virtual Result<void> write(const Bytes& data) = 0;
    virtual Result<Bytes> read_exact(std::size_t n) = 0;
    virtual void close() = 0;
};

class Listener {
public:
    virtual ~Listener() = default;
    virtual Result<std::unique_ptr<Pipe>> accept() = 0;
    virtual void close() = 0;
    virtual std::uint16_t port() const = 0;
};

class Network {
public:
    virtual ~Network() = default;
    virtual Result<std::unique_ptr<Pipe>> connect(const std::string& ip, std::uint16_t port) = 0;
    virtual Result<std::unique_ptr<Listener>> listen(const std::string& ip,
                                                     std::uint16_t port) = 0;
};

// Weighted empirical RTT distribution: list of (milliseconds, weight).
using RttDistribution = std::vector<std::pair<double, double>>;

// Deterministic under a fixed generator state. Empty distribution is an error.
Result<double> sample_rtt(const RttDistribution& distribution, std::mt19937_64& rng);

// In-process message bus. Connections incur a sampled one-way delay of
// RTT/2 per record; the adversary hooks let tests corrupt bytes in flight.
class SimulatedNetwork : public Network {
public:
    SimulatedNetwork();
    ~SimulatedNetwork() override;

    void set_rtt(RttDistribution distribution, std::uint64_t seed);
    // Flips one byte of the next record written through any pipe.
    void arm_tamper();

    Result<std::unique_ptr<Pipe>> connect(const std::string& ip, std::uint16_t port) override;
    Result<std::unique_ptr<Listener>> listen(const std::string& ip,
                                             std::uint16_t port) override;

    struct Impl;  // shared with the pipe/listener implementations

private:
    std::shared_ptr<Impl> impl_;
};

class TcpNetwork : public Network {
public:
    Result<std::unique_ptr<Pipe>> connect(const std::string& ip, std::uint16_t port) override;
    Result<std::unique_ptr<Listener>> listen(const std::string& ip,
                                             std::uint16_t port) override;
};

struct ChannelConfig {
    crypto::Certificate local_cert;
    crypto::SecretKey local_secret{};  // signing key matching local_cert
    crypto::PublicKey trusted_ca{};
    bool verify_peer_certificate = true;
    // Provider front door: peers without a CA-signed certificate may connect
    // but are marked unverified; per-operation checks gate what they can do.
    bool allow_unverified_peer = false;
    // Test hook observing plaintext frames, sent and received.
    std::function<void(const Frame&)> frame_tap;
};

// Mutually authenticated, confidential, ordered channel over a Pipe:
// certificate exchange, ephemeral X25519, transcript signatures, then
// AEAD-sealed records with strict sequence numbers. Any integrity failure
// aborts the channel before a frame reaches the caller.
class SecureChannel {
public:
    static Result<std::unique_ptr<SecureChannel>> connect(std::unique_ptr<Pipe> pipe,
                                                          const ChannelConfig& config,
                                                          const std::string& expected_remote_id);
    static Result<std::unique_ptr<SecureChannel>> accept(std::unique_ptr<Pipe> pipe,
                                                         const ChannelConfig& config);

    Result<void> send(const Frame& frame);
    Result<Frame> recv();
    void close();

    const std::string& remote_id() const { return remote_id_; }
    bool remote_verified() const { return remote_verified_; }

private:
    SecureChannel(std::unique_ptr<Pipe> pipe, ChannelConfig config);

    Result<void> write_record(const Bytes& plaintext);
    Result<Bytes> read_record();

    std::unique_ptr<Pipe> pipe_;
    ChannelConfig config_;
    std::string remote_id_;
    bool remote_verified_ = false;
    crypto::SharedKey send_key_{};
    crypto::SharedKey recv_key_{};
    std::uint64_t send_seq_ = 0;
    std::uint64_t recv_seq_ = 0;
    bool aborted_ = false;
};

}  // namespace pact
