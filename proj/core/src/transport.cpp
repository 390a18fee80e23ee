#include "pact/transport.hpp"

#include <atomic>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

namespace pact {

Bytes encode_frame(const Frame& frame) {
    Bytes out;
    out.push_back(static_cast<std::uint8_t>(frame.type));
    out.push_back(static_cast<std::uint8_t>(frame.token.size() >> 8));
    out.push_back(static_cast<std::uint8_t>(frame.token.size() & 0xff));
    out.insert(out.end(), frame.token.begin(), frame.token.end());
    out.insert(out.end(), frame.payload.begin(), frame.payload.end());
    return out;
}

Result<Frame> decode_frame(const Bytes& encoded) {
    if (encoded.size() < 3) return Error{ErrorCode::BadInput, "frame too short"};
    Frame frame;
    auto type = encoded[0];
    if (type < 1 || type > 6) return Error{ErrorCode::BadInput, "unknown frame type"};
    frame.type = static_cast<FrameType>(type);
    std::size_t token_len = (std::size_t(encoded[1]) << 8) | encoded[2];
    if (3 + token_len > encoded.size())
        return Error{ErrorCode::BadInput, "token length overruns frame"};
    frame.token.assign(encoded.begin() + 3, encoded.begin() + 3 + token_len);
    frame.payload.assign(encoded.begin() + 3 + token_len, encoded.end());
    return frame;
}

Result<double> sample_rtt(const RttDistribution& distribution, std::mt19937_64& rng) {
    if (distribution.empty()) {
        return Error{ErrorCode::BadInput, "empty RTT distribution"};
    }
    double total = 0;
    for (const auto& [ms, w] : distribution) total += w;
    if (total <= 0) return Error{ErrorCode::BadInput, "non-positive RTT weights"};
    double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    double acc = 0;
    for (const auto& [ms, w] : distribution) {
        acc += w;
        if (u <= acc) return ms;
    }
    return distribution.back().first;
}

// ---------------------------------------------------------------- simulated

namespace {

using Clock = std::chrono::steady_clock;

// One direction of an in-memory connection.
struct ByteQueue {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::pair<Clock::time_point, Bytes>> records;  // (ready_at, data)
    std::size_t cursor = 0;  // offset into front record
    bool closed = false;

    void push(Bytes data, Clock::time_point ready_at) {
        {
            std::lock_guard lock(mu);
            records.emplace_back(ready_at, std::move(data));
        }
        cv.notify_all();
    }

    Result<Bytes> read_exact(std::size_t n) {
        Bytes out;
        out.reserve(n);
        std::unique_lock lock(mu);
        while (out.size() < n) {
            cv.wait(lock, [&] { return closed || !records.empty(); });
            if (records.empty()) return Error{ErrorCode::ChannelClosed, "pipe closed"};
            auto& [ready_at, data] = records.front();
            if (auto now = Clock::now(); now < ready_at) {
                cv.wait_until(lock, ready_at);
                continue;
            }
            while (out.size() < n && cursor < data.size()) out.push_back(data[cursor++]);
            if (cursor == data.size()) {
                records.pop_front();
                cursor = 0;
            }
        }
        return out;
    }

    void close() {
        {
            std::lock_guard lock(mu);
            closed = true;
        }
        cv.notify_all();
    }
};

}  // namespace

struct SimListenerState {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::unique_ptr<Pipe>> pending;
    bool closed = false;
    std::uint16_t port = 0;
};

struct SimulatedNetwork::Impl {
    std::mutex mu;
    std::map<std::string, std::shared_ptr<SimListenerState>> listeners;
    RttDistribution rtt;
    std::mt19937_64 rng;
    bool tamper_armed = false;

    Impl() : rng(12345) {}
};

namespace {

class SimPipe : public Pipe {
public:
    SimPipe(std::shared_ptr<ByteQueue> in, std::shared_ptr<ByteQueue> out,
            std::weak_ptr<SimulatedNetwork::Impl> net, Clock::duration one_way)
        : in_(std::move(in)), out_(std::move(out)), net_(std::move(net)), one_way_(one_way) {}

    ~SimPipe() override { close(); }

    Result<void> write(const Bytes& data) override {
        Bytes copy = data;
        if (auto net = net_.lock()) {
            std::lock_guard lock(net->mu);
            if (net->tamper_armed && !copy.empty()) {
                copy[copy.size() / 2] ^= 0x40;
                net->tamper_armed = false;
            }
        }
        out_->push(std::move(copy), Clock::now() + one_way_);
        return {};
    }

    Result<Bytes> read_exact(std::size_t n) override { return in_->read_exact(n); }

    void close() override {
        in_->close();
        out_->close();
    }

private:
    std::shared_ptr<ByteQueue> in_, out_;
    std::weak_ptr<SimulatedNetwork::Impl> net_;
    Clock::duration one_way_;
};

class SimListener : public Listener {
public:
    SimListener(std::shared_ptr<SimListenerState> state,
                std::shared_ptr<SimulatedNetwork::Impl> impl, std::string key)
        : state_(std::move(state)), impl_(std::move(impl)), key_(std::move(key)) {}

    ~SimListener() override { close(); }

    Result<std::unique_ptr<Pipe>> accept() override {
        std::unique_lock lock(state_->mu);
        state_->cv.wait(lock, [&] { return state_->closed || !state_->pending.empty(); });
        if (state_->pending.empty()) return Error{ErrorCode::ChannelClosed, "listener closed"};
        auto pipe = std::move(state_->pending.front());
        state_->pending.pop_front();
        return pipe;
    }

    void close() override {
        {
            std::lock_guard lock(state_->mu);
            if (state_->closed) return;
            state_->closed = true;
        }
        state_->cv.notify_all();
        std::lock_guard lock(impl_->mu);
        impl_->listeners.erase(key_);
    }

    std::uint16_t port() const override { return state_->port; }

private:
    std::shared_ptr<SimListenerState> state_;
    std::shared_ptr<SimulatedNetwork::Impl> impl_;
    std::string key_;
};

}  // namespace

SimulatedNetwork::SimulatedNetwork() : impl_(std::make_shared<Impl>()) {}
SimulatedNetwork::~SimulatedNetwork() = default;

void SimulatedNetwork::set_rtt(RttDistribution distribution, std::uint64_t seed) {
    std::lock_guard lock(impl_->mu);
    impl_->rtt = std::move(distribution);
    impl_->rng.seed(seed);
}

void SimulatedNetwork::arm_tamper() {
    std::lock_guard lock(impl_->mu);
    impl_->tamper_armed = true;
}

Result<std::unique_ptr<Listener>> SimulatedNetwork::listen(const std::string& ip,
                                                           std::uint16_t port) {
    std::lock_guard lock(impl_->mu);
    std::string key = ip + ":" + std::to_string(port);
    if (impl_->listeners.contains(key)) {
        return Error{ErrorCode::Conflict, "simulated port in use: " + key};
    }
    auto state = std::make_shared<SimListenerState>();
    state->port = port;
    impl_->listeners[key] = state;
    return std::unique_ptr<Listener>(new SimListener(state, impl_, key));
}

Result<std::unique_ptr<Pipe>> SimulatedNetwork::connect(const std::string& ip,
                                                        std::uint16_t port) {
    std::shared_ptr<SimListenerState> state;
    Clock::duration one_way{};
    {
        std::lock_guard lock(impl_->mu);
        auto it = impl_->listeners.find(ip + ":" + std::to_string(port));
        if (it == impl_->listeners.end()) {
            return Error{ErrorCode::NotFound, "nothing listening on " + ip};
        }
        state = it->second;
        if (!impl_->rtt.empty()) {
            auto rtt = sample_rtt(impl_->rtt, impl_->rng);
            if (!rtt) return rtt.error();
            one_way = std::chrono::duration_cast<Clock::duration>(
                std::chrono::duration<double, std::milli>(*rtt / 2.0));
        }
    }
    auto a_to_b = std::make_shared<ByteQueue>();
    auto b_to_a = std::make_shared<ByteQueue>();
    auto client = std::make_unique<SimPipe>(b_to_a, a_to_b, impl_, one_way);
    auto server = std::make_unique<SimPipe>(a_to_b, b_to_a, impl_, one_way);
    {
        std::lock_guard lock(state->mu);
        if (state->closed) return Error{ErrorCode::ChannelClosed, "listener closed"};
        state->pending.push_back(std::move(server));
    }
    state->cv.notify_all();
    return std::unique_ptr<Pipe>(std::move(client));
}

// ---------------------------------------------------------------------- tcp

namespace {

class TcpPipe : public Pipe {
public:
    explicit TcpPipe(int fd) : fd_(fd) {}

    ~TcpPipe() override {
        int fd = fd_.exchange(-1);
        if (fd >= 0) {
            ::shutdown(fd, SHUT_RDWR);
            ::close(fd);
        }
    }

    Result<void> write(const Bytes& data) override {
        std::size_t sent = 0;
        while (sent < data.size()) {
            ssize_t n =
                ::send(fd_.load(), data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
            if (n <= 0) return Error{ErrorCode::ChannelClosed, "socket write failed"};
            sent += static_cast<std::size_t>(n);
        }
        return {};
    }

    Result<Bytes> read_exact(std::size_t n) override {
        Bytes out(n);
        std::size_t got = 0;
        while (got < n) {
            ssize_t r = ::recv(fd_.load(), out.data() + got, n - got, 0);
            if (r <= 0) return Error{ErrorCode::ChannelClosed, "socket read failed"};
            got += static_cast<std::size_t>(r);
        }
        return out;
    }

    // May be called from another thread while a read is blocked; only shuts
    // the socket down to wake it. The descriptor is released in the
    // destructor, once no reader can still be using it.
    void close() override {
        int fd = fd_.load();
        if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
    }

private:
    std::atomic<int> fd_;
};

class TcpListener : public Listener {
public:
    TcpListener(int fd, std::uint16_t port) : fd_(fd), port_(port) {}

    ~TcpListener() override {
        close();
        int fd = fd_.exchange(-1);
        if (fd >= 0) ::close(fd);
    }

    Result<std::unique_ptr<Pipe>> accept() override {
        int client = ::accept(fd_.load(), nullptr, nullptr);
        if (client < 0) return Error{ErrorCode::ChannelClosed, "accept failed"};
        int one = 1;
        ::setsockopt(client, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        return std::unique_ptr<Pipe>(new TcpPipe(client));
    }

    void close() override {
        int fd = fd_.load();
        if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
    }

    std::uint16_t port() const override { return port_; }

private:
    std::atomic<int> fd_;
    std::uint16_t port_;
};

}  // namespace

Result<std::unique_ptr<Pipe>> TcpNetwork::connect(const std::string& ip, std::uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return Error{ErrorCode::Internal, "socket() failed"};
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (inet_pton(AF_INET, ip.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        return Error{ErrorCode::BadInput, "bad IPv4 address: " + ip};
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        return Error{ErrorCode::NotFound, "connect failed to " + ip};
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return std::unique_ptr<Pipe>(new TcpPipe(fd));
}

Result<std::unique_ptr<Listener>> TcpNetwork::listen(const std::string& ip,
                                                     std::uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return Error{ErrorCode::Internal, "socket() failed"};
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (inet_pton(AF_INET, ip.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        return Error{ErrorCode::BadInput, "bad IPv4 address: " + ip};
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        return Error{ErrorCode::Conflict, "port in use: " + std::to_string(port)};
    }
    if (::listen(fd, 64) != 0) {
        ::close(fd);
        return Error{ErrorCode::Internal, "listen() failed"};
    }
    if (port == 0) {
        sockaddr_in bound{};
        socklen_t len = sizeof bound;
        ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
        port = ntohs(bound.sin_port);
    }
    return std::unique_ptr<Listener>(new TcpListener(fd, port));
}

// ----------------------------------------------------------- secure channel

namespace {

constexpr char kTranscriptLabel[] = "pact/channel-v1";

Bytes length_prefixed(const Bytes& data) {
    Bytes out;
    put_u32_be(out, static_cast<std::uint32_t>(data.size()));
    out.insert(out.end(), data.begin(), data.end());
    return out;
}

Result<Bytes> read_record_raw(Pipe& pipe) {
    auto header = pipe.read_exact(4);
    if (!header) return header.error();
    std::uint32_t len = get_u32_be(header->data());
    if (len > (1u << 24)) return Error{ErrorCode::BadInput, "oversized record"};
    return pipe.read_exact(len);
}

Bytes cert_wire(const crypto::Certificate& cert) {
    return Encoder{}
        .field(cert.subject_id)
        .field(cert.subject_public)
        .field(cert.issuer_signature)
        .take();
}

Result<crypto::Certificate> cert_unwire(const Bytes& data) {
    std::size_t off = 0;
    auto read_field = [&](Bytes& out) -> bool {
        if (off + 4 > data.size()) return false;
        std::uint32_t len = get_u32_be(data.data() + off);
        off += 4;
        if (off + len > data.size()) return false;
        out.assign(data.begin() + off, data.begin() + off + len);
        off += len;
        return true;
    };
    Bytes id, pk, sig;
    if (!read_field(id) || !read_field(pk) || !read_field(sig) || pk.size() != 32 ||
        sig.size() != 64 || off != data.size()) {
        return Error{ErrorCode::HandshakeFailed, "malformed certificate"};
    }
    crypto::Certificate cert;
    cert.subject_id = to_string(id);
    std::memcpy(cert.subject_public.data(), pk.data(), 32);
    std::memcpy(cert.issuer_signature.data(), sig.data(), 64);
    return cert;
}

Bytes transcript_tbs(const crypto::ExchangePublicKey& eph_i,
                     const crypto::ExchangePublicKey& eph_r, std::string_view role) {
    return Encoder{}.field(kTranscriptLabel).field(eph_i).field(eph_r).field(role).take();
}

crypto::SharedKey direction_key(const crypto::SharedKey& base, std::uint8_t dir) {
    Bytes input(base.key.begin(), base.key.end());
    input.push_back(dir);
    crypto::SharedKey out;
    out.key = crypto::hash(input);
    return out;
}

}  // namespace

SecureChannel::SecureChannel(std::unique_ptr<Pipe> pipe, ChannelConfig config)
    : pipe_(std::move(pipe)), config_(std::move(config)) {}

Result<std::unique_ptr<SecureChannel>> SecureChannel::connect(
    std::unique_ptr<Pipe> pipe, const ChannelConfig& config,
    const std::string& expected_remote_id) {
    auto eph = crypto::keygen_exchange();

    Bytes msg1;
    msg1.insert(msg1.end(), eph.public_key.begin(), eph.public_key.end());
    auto cw = cert_wire(config.local_cert);
    msg1.insert(msg1.end(), cw.begin(), cw.end());
    if (auto w = pipe->write(length_prefixed(msg1)); !w) return w.error();

    auto msg2 = read_record_raw(*pipe);
    if (!msg2) return Error{ErrorCode::HandshakeFailed, "handshake rejected by peer"};
    if (msg2->size() < 32 + 64) return Error{ErrorCode::HandshakeFailed, "short response"};
    crypto::ExchangePublicKey peer_eph;
    std::memcpy(peer_eph.data(), msg2->data(), 32);
    Bytes peer_sig(msg2->end() - 64, msg2->end());
    auto peer_cert = cert_unwire(Bytes(msg2->begin() + 32, msg2->end() - 64));
    if (!peer_cert) return peer_cert.error();

    if (!crypto::verify_certificate(config.trusted_ca, *peer_cert)) {
        return Error{ErrorCode::HandshakeFailed, "peer certificate not CA-signed"};
    }
    if (peer_cert->subject_id != expected_remote_id) {
        return Error{ErrorCode::HandshakeFailed,
                     "peer identity mismatch: " + peer_cert->subject_id};
    }
    if (!crypto::verify(peer_cert->subject_public,
                        transcript_tbs(eph.public_key, peer_eph, "responder"), peer_sig)) {
        return Error{ErrorCode::HandshakeFailed, "peer transcript signature"};
    }

    auto sig = crypto::sign(config.local_secret,
                            transcript_tbs(eph.public_key, peer_eph, "initiator"));
    Bytes msg3(sig.begin(), sig.end());
    if (auto w = pipe->write(length_prefixed(msg3)); !w) return w.error();

    auto shared = crypto::dh(eph.secret_key, peer_eph);
    if (!shared) return Error{ErrorCode::HandshakeFailed, "ephemeral DH failed"};
    auto base = crypto::kdf(*shared);
    if (!base) return base.error();

    auto channel =
        std::unique_ptr<SecureChannel>(new SecureChannel(std::move(pipe), config));
    channel->remote_id_ = peer_cert->subject_id;
    channel->remote_verified_ = true;
    channel->send_key_ = direction_key(*base, 1);  // initiator -> responder
    channel->recv_key_ = direction_key(*base, 2);
    return channel;
}

Result<std::unique_ptr<SecureChannel>> SecureChannel::accept(std::unique_ptr<Pipe> pipe,
                                                             const ChannelConfig& config) {
    auto msg1 = read_record_raw(*pipe);
    if (!msg1) return Error{ErrorCode::HandshakeFailed, "no client hello"};
    if (msg1->size() < 32) return Error{ErrorCode::HandshakeFailed, "short client hello"};
    crypto::ExchangePublicKey peer_eph;
    std::memcpy(peer_eph.data(), msg1->data(), 32);
    auto peer_cert = cert_unwire(Bytes(msg1->begin() + 32, msg1->end()));
    if (!peer_cert) return peer_cert.error();

    bool verified = crypto::verify_certificate(config.trusted_ca, *peer_cert);
    if (config.verify_peer_certificate && !verified && !config.allow_unverified_peer) {
        pipe->close();  // reject before any application frame
        return Error{ErrorCode::HandshakeFailed,
                     "client certificate not CA-signed: " + peer_cert->subject_id};
    }

    auto eph = crypto::keygen_exchange();
    auto sig = crypto::sign(config.local_secret,
                            transcript_tbs(peer_eph, eph.public_key, "responder"));
    Bytes msg2;
    msg2.insert(msg2.end(), eph.public_key.begin(), eph.public_key.end());
    auto cw = cert_wire(config.local_cert);
    msg2.insert(msg2.end(), cw.begin(), cw.end());
    msg2.insert(msg2.end(), sig.begin(), sig.end());
    if (auto w = pipe->write(length_prefixed(msg2)); !w) return w.error();

    auto msg3 = read_record_raw(*pipe);
    if (!msg3 || msg3->size() != 64) {
        return Error{ErrorCode::HandshakeFailed, "missing client transcript signature"};
    }
    if (!crypto::verify(peer_cert->subject_public,
                        transcript_tbs(peer_eph, eph.public_key, "initiator"), *msg3)) {
        return Error{ErrorCode::HandshakeFailed, "client transcript signature"};
    }

    auto shared = crypto::dh(eph.secret_key, peer_eph);
    if (!shared) return Error{ErrorCode::HandshakeFailed, "ephemeral DH failed"};
    auto base = crypto::kdf(*shared);
    if (!base) return base.error();

    auto channel =
        std::unique_ptr<SecureChannel>(new SecureChannel(std::move(pipe), config));
    channel->remote_id_ = peer_cert->subject_id;
    channel->remote_verified_ = verified || !config.verify_peer_certificate;
    channel->send_key_ = direction_key(*base, 2);  // responder -> initiator
    channel->recv_key_ = direction_key(*base, 1);
    return channel;
}

Result<void> SecureChannel::write_record(const Bytes& plaintext) {
    if (aborted_) return Error{ErrorCode::ChannelClosed, "channel aborted"};
    Bytes numbered;
    put_u64_be(numbered, send_seq_++);
    numbered.insert(numbered.end(), plaintext.begin(), plaintext.end());
    return pipe_->write(length_prefixed(crypto::seal(send_key_, numbered)));
}

Result<Bytes> SecureChannel::read_record() {
    if (aborted_) return Error{ErrorCode::ChannelClosed, "channel aborted"};
    auto sealed = read_record_raw(*pipe_);
    if (!sealed) return sealed.error();
    auto opened = crypto::open(recv_key_, *sealed);
    if (!opened || opened->size() < 8 || get_u64_be(opened->data()) != recv_seq_) {
        aborted_ = true;
        pipe_->close();
        return Error{ErrorCode::Tamper, "record integrity failure; channel aborted"};
    }
    ++recv_seq_;
    return Bytes(opened->begin() + 8, opened->end());
}

Result<void> SecureChannel::send(const Frame& frame) {
    if (config_.frame_tap) config_.frame_tap(frame);
    return write_record(encode_frame(frame));
}

Result<Frame> SecureChannel::recv() {
    auto record = read_record();
    if (!record) return record.error();
    auto frame = decode_frame(*record);
    if (frame && config_.frame_tap) config_.frame_tap(*frame);
    return frame;
}

void SecureChannel::close() {
    aborted_ = true;
    pipe_->close();
}

}  // namespace pact
