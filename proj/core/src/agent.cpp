#include "pact/agent.hpp"

#include <chrono>

#include "json.hpp"

namespace pact {

using nlohmann::json;

namespace {

json frame_error(ErrorCode code, const std::string& message) {
    return {{"code", std::string(error_code_name(code))}, {"message", message}};
}

Frame error_frame(ErrorCode code, const std::string& message) {
    return Frame{FrameType::Error, {}, to_bytes(frame_error(code, message).dump())};
}

Frame reject_frame(TokenReject reason) {
    json j = frame_error(ErrorCode::Forbidden, "token rejected");
    j["reject"] = std::string(token_reject_name(reason));
    return Frame{FrameType::Error, {}, to_bytes(j.dump())};
}

Error error_from_frame(const Frame& frame) {
    auto j = json::parse(to_string(frame.payload), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        return Error{ErrorCode::Internal, "malformed error frame"};
    }
    auto code = error_code_from_name(j.value("code", ""));
    std::string message = j.value("message", "remote error");
    if (j.contains("reject")) message = j["reject"].get<std::string>();
    return Error{code.value_or(ErrorCode::Internal), message};
}

}  // namespace

std::int64_t system_clock_seconds() {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

InitiatorInfo AgentIdentity::initiator_info() const {
    InitiatorInfo info;
    info.agent_id = agent_id;
    info.tls_cert = tls_cert;
    info.endpoint = endpoint;
    info.access_public = access_keys.public_key;
    info.owner_signature = owner_signature;
    return info;
}

OtkBatch make_signed_otks(const crypto::SecretKey& owner_secret, const AgentId& agent_id,
                          std::size_t count) {
    OtkBatch batch;
    batch.pairs.reserve(count);
    batch.signed_otks.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto pair = crypto::keygen_exchange();
        SignedOtk signed_otk;
        signed_otk.otk = pair.public_key;
        signed_otk.owner_signature =
            crypto::sign(owner_secret, otk_binding_tbs(agent_id, pair.public_key));
        batch.pairs.push_back(pair);
        batch.signed_otks.push_back(signed_otk);
    }
    return batch;
}

RegistrationMaterial prepare_registration(const crypto::SecretKey& owner_secret,
                                          const AgentId& agent_id,
                                          const EndpointDescriptor& endpoint,
                                          const ContactPolicy& policy,
                                          const crypto::SigningKeyPair& tls_keys,
                                          const crypto::Certificate& tls_cert,
                                          const crypto::ExchangeKeyPair& access_keys,
                                          const crypto::PublicKey& provider_public,
                                          std::size_t otk_count) {
    RegistrationMaterial material;
    auto& sub = material.submission;
    sub.agent_id = agent_id;
    sub.endpoint = endpoint;
    sub.policy = policy;
    sub.tls_cert = tls_cert;
    sub.access_public = access_keys.public_key;
    sub.owner_signature = crypto::sign(
        owner_secret, agent_binding_tbs(agent_id, endpoint, tls_keys.public_key,
                                        access_keys.public_key, provider_public));
    auto batch = make_signed_otks(owner_secret, agent_id, otk_count);
    sub.otks = std::move(batch.signed_otks);
    material.otk_pairs = std::move(batch.pairs);
    return material;
}

AppHandler make_echo_handler() {
    return [](const Bytes& request) { return request; };
}

AppHandler make_scripted_handler(std::vector<std::string> replies) {
    auto state = std::make_shared<std::pair<std::mutex, std::size_t>>();
    auto script = std::make_shared<std::vector<std::string>>(std::move(replies));
    return [state, script](const Bytes&) -> Bytes {
        std::lock_guard lock(state->first);
        if (state->second >= script->size()) return {};
        return to_bytes((*script)[state->second++]);
    };
}

Result<void> verify_grant(const ContactGrant& grant, const crypto::PublicKey& ca_public,
                          const crypto::PublicKey& provider_public) {
    if (!crypto::verify_certificate(ca_public, grant.owner_cert)) {
        return Error{ErrorCode::BadSignature, "grant owner certificate"};
    }
    if (!crypto::verify_certificate(ca_public, grant.tls_cert) ||
        grant.tls_cert.subject_id != grant.agent_id.str()) {
        return Error{ErrorCode::BadSignature, "grant agent certificate"};
    }
    const auto& owner_pk = grant.owner_cert.subject_public;
    auto binding = agent_binding_tbs(grant.agent_id, grant.endpoint,
                                     grant.tls_cert.subject_public, grant.access_public,
                                     provider_public);
    if (!crypto::verify(owner_pk, binding, grant.agent_signature)) {
        return Error{ErrorCode::BadSignature, "grant agent binding signature"};
    }
    if (!crypto::verify(owner_pk, otk_binding_tbs(grant.agent_id, grant.otk),
                        grant.otk_signature)) {
        return Error{ErrorCode::BadSignature, "grant one-time key signature"};
    }
    return {};
}

Result<crypto::ExchangePublicKey> verify_initiator(
    const InitiatorInfo& info, const crypto::Signature& provider_signature,
    const std::string& channel_id, bool channel_verified,
    const crypto::PublicKey& ca_public, const crypto::PublicKey& provider_public,
    const GuardToggles& toggles) {
    if (!crypto::verify_certificate(ca_public, info.tls_cert) ||
        info.tls_cert.subject_id != info.agent_id.str()) {
        return Error{ErrorCode::BadSignature, "initiator certificate"};
    }
    // The presented identity must be the one the channel was authenticated
    // as; someone else's attested info does not transfer.
    if (channel_verified && channel_id != info.agent_id.str()) {
        return Error{ErrorCode::BadSignature,
                     "initiator info does not match channel identity"};
    }
    if (toggles.verify_provider_signature) {
        auto tbs = provider_attestation_tbs(info.agent_id, info.tls_cert, info.endpoint,
                                            info.access_public, info.owner_signature);
        if (!crypto::verify(provider_public, tbs, provider_signature)) {
            return Error{ErrorCode::BadSignature, "provider attestation"};
        }
    }
    return info.access_public;
}

AgentRuntime::AgentRuntime(AgentIdentity& identity, AgentRuntimeConfig config,
                           AppHandler handler)
    : identity_(identity),
      config_(std::move(config)),
      handler_(std::move(handler)),
      ledger_(config_.toggles) {
    if (!config_.clock) config_.clock = system_clock_seconds;
}

AgentRuntime::~AgentRuntime() { stop(); }

Result<void> AgentRuntime::start(Network& network) {
    auto listener = network.listen(identity_.endpoint.ip, identity_.endpoint.port);
    if (!listener) return listener.error();
    listener_ = std::move(*listener);
    port_ = listener_->port();
    running_ = true;
    accept_thread_ = std::thread([this] { serve_loop(); });
    return {};
}

void AgentRuntime::stop() {
    if (!running_.exchange(false)) return;
    if (listener_) listener_->close();
    if (accept_thread_.joinable()) accept_thread_.join();
    {
        // Wake workers blocked on reads from still-open connections.
        std::lock_guard lock(conn_mu_);
        for (auto* pipe : active_pipes_) pipe->close();
    }
    for (auto& w : workers_)
        if (w.joinable()) w.join();
    workers_.clear();
}

void AgentRuntime::serve_loop() {
    while (running_) {
        auto pipe = listener_->accept();
        if (!pipe) break;
        workers_.emplace_back([this, p = std::move(*pipe)]() mutable {
            handle_connection(std::move(p));
        });
    }
}

void AgentRuntime::handle_connection(std::unique_ptr<Pipe> pipe) {
    ChannelConfig cfg;
    cfg.local_cert = identity_.tls_cert;
    cfg.local_secret = identity_.tls_keys.secret_key;
    cfg.trusted_ca = config_.ca_public;
    cfg.verify_peer_certificate = config_.toggles.verify_peer_certificate;
    cfg.frame_tap = config_.frame_tap;

    Pipe* raw = pipe.get();
    {
        std::lock_guard lock(conn_mu_);
        active_pipes_.insert(raw);
    }
    auto channel = SecureChannel::accept(std::move(pipe), cfg);
    if (channel) {
        auto& ch = **channel;
        std::optional<crypto::ExchangePublicKey> session_pac;
        while (running_) {
            auto frame = ch.recv();
            if (!frame) break;
            bool fatal = false;
            Frame response =
                handle_frame(*frame, ch.remote_verified(), ch.remote_id(), session_pac, fatal);
            if (!ch.send(response) || fatal) break;
        }
        ch.close();
    }
    std::lock_guard lock(conn_mu_);
    active_pipes_.erase(raw);
}

Frame AgentRuntime::handle_frame(const Frame& frame, bool channel_verified,
                                 const std::string& channel_id,
                                 std::optional<crypto::ExchangePublicKey>& session_pac,
                                 bool& fatal) {
    const std::int64_t now = config_.clock();
    switch (frame.type) {
        case FrameType::Handshake: {
            auto j = json::parse(to_string(frame.payload), nullptr, false);
            if (j.is_discarded() || !j.is_object() || !j.contains("initiator_info")) {
                fatal = true;
                return error_frame(ErrorCode::BadInput, "malformed identify payload");
            }
            auto info = initiator_info_from_json(j["initiator_info"].dump());
            crypto::Signature provider_sig{};
            if (!info || !hex_decode(j.value("provider_signature", ""), provider_sig)) {
                fatal = true;
                return error_frame(ErrorCode::BadInput, "malformed identify payload");
            }
            auto pac = verify_initiator(*info, provider_sig, channel_id, channel_verified,
                                        config_.ca_public, config_.provider_public,
                                        config_.toggles);
            if (!pac) {
                fatal = true;
                return error_frame(pac.code(), pac.error().message);
            }
            session_pac = *pac;
            return Frame{FrameType::Handshake, {}, to_bytes(json{{"ok", true}}.dump())};
        }
        case FrameType::TokenRequest: {
            auto j = json::parse(to_string(frame.payload), nullptr, false);
            if (j.is_discarded() || !j.is_object()) {
                fatal = true;
                return error_frame(ErrorCode::BadInput, "malformed token request");
            }
            const std::string op = j.value("op", "issue");
            if (op == "release") {
                ledger_.release(AccessToken{frame.token});
                return Frame{FrameType::TokenResponse, {},
                             to_bytes(json{{"ok", true}}.dump())};
            }
            if (!session_pac) {
                fatal = true;
                return error_frame(ErrorCode::AuthFailed, "token request before identify");
            }
            crypto::ExchangePublicKey otk{};
            if (!hex_decode(j.value("otk", ""), otk)) {
                fatal = true;
                return error_frame(ErrorCode::AuthFailed, "missing one-time key");
            }
            auto sdhk = identity_.otk_store.consume_and_derive(otk, *session_pac);
            if (!sdhk) {
                fatal = true;
                return error_frame(ErrorCode::AuthFailed, "unknown one-time key");
            }
            auto token = ledger_.issue(*sdhk, config_.token_params, *session_pac, now);
            return Frame{FrameType::TokenResponse, {},
                         to_bytes(json{{"token", hex_encode(token.ciphertext)}}.dump())};
        }
        case FrameType::AppRequest: {
            if (frame.token.empty() || !session_pac) {
                if (config_.toggles.require_access_credential) {
                    fatal = true;
                    return error_frame(ErrorCode::AuthFailed,
                                       "request without access credential");
                }
                handler_invocations_.fetch_add(1);
                return Frame{FrameType::AppResponse, {}, handler_(frame.payload)};
            }
            auto decision = ledger_.validate(AccessToken{frame.token}, *session_pac, now);
            if (!decision.accepted) return reject_frame(decision.reason);
            handler_invocations_.fetch_add(1);
            return Frame{FrameType::AppResponse, {}, handler_(frame.payload)};
        }
        default:
            fatal = true;
            return error_frame(ErrorCode::BadInput, "unexpected frame type");
    }
}

Initiator::Initiator(AgentIdentity& identity, InitiatorConfig config,
                     ProviderClient& provider, Network& agent_network)
    : identity_(identity),
      config_(std::move(config)),
      provider_(provider),
      network_(agent_network) {
    if (!config_.clock) config_.clock = system_clock_seconds;
}

Initiator::~Initiator() {
    for (auto& [_, session] : sessions_)
        if (session.channel) session.channel->close();
}

Result<void> Initiator::identify(SecureChannel& channel) {
    json payload = {
        {"initiator_info", json::parse(initiator_info_to_json(identity_.initiator_info()))},
        {"provider_signature", hex_encode(identity_.provider_signature)},
    };
    if (auto s = channel.send(Frame{FrameType::Handshake, {}, to_bytes(payload.dump())}); !s)
        return s.error();
    auto reply = channel.recv();
    if (!reply) return reply.error();
    if (reply->type == FrameType::Error) return error_from_frame(*reply);
    if (reply->type != FrameType::Handshake)
        return Error{ErrorCode::HandshakeFailed, "unexpected identify reply"};
    return {};
}

Result<void> Initiator::resolve_cycle(const AgentId& receiver) {
    auto grant = provider_.resolve_contact(receiver);
    if (!grant) return grant.error();
    if (auto v = verify_grant(*grant, config_.ca_public, config_.provider_public); !v)
        return v.error();

    auto& session = sessions_[receiver.str()];
    if (session.channel) {
        session.channel->close();
        session.channel.reset();
    }
    auto pipe = network_.connect(grant->endpoint.ip, grant->endpoint.port);
    if (!pipe) return pipe.error();
    ChannelConfig cfg;
    cfg.local_cert = identity_.tls_cert;
    cfg.local_secret = identity_.tls_keys.secret_key;
    cfg.trusted_ca = config_.ca_public;
    auto channel = SecureChannel::connect(std::move(*pipe), cfg, receiver.str());
    if (!channel) return channel.error();
    session.channel = std::move(*channel);

    if (auto id = identify(*session.channel); !id) return id.error();

    auto sdhk = derive_sdhk_initiator(identity_.access_keys.secret_key, grant->otk);
    if (!sdhk) return sdhk.error();
    json request = {{"op", "issue"}, {"otk", hex_encode(grant->otk)}};
    if (auto s = session.channel->send(
            Frame{FrameType::TokenRequest, {}, to_bytes(request.dump())});
        !s)
        return s.error();
    auto reply = session.channel->recv();
    if (!reply) return reply.error();
    if (reply->type == FrameType::Error) return error_from_frame(*reply);
    auto j = json::parse(to_string(reply->payload), nullptr, false);
    AccessToken token;
    if (reply->type != FrameType::TokenResponse || j.is_discarded() ||
        !hex_decode(j.value("token", ""), token.ciphertext)) {
        return Error{ErrorCode::HandshakeFailed, "malformed token response"};
    }
    auto opened = crypto::open(*sdhk, token.ciphertext);
    if (!opened) return Error{ErrorCode::Tamper, "token does not open under session key"};
    auto fields = decode_token_fields(*opened);
    if (!fields) return fields.error();
    if (fields->initiator_pac != identity_.access_keys.public_key) {
        return Error{ErrorCode::Tamper, "token bound to a different access key"};
    }
    cache_.put(receiver, token, *fields);
    resolve_cycles_.fetch_add(1);
    return {};
}

Result<Bytes> Initiator::send_request(const AgentId& receiver, const Bytes& payload) {
    std::lock_guard lock(mu_);
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto token = cache_.should_reuse(receiver, config_.clock());
        if (!token) {
            if (auto r = resolve_cycle(receiver); !r) return r.error();
            token = cache_.should_reuse(receiver, config_.clock());
            if (!token) return Error{ErrorCode::Internal, "no token after resolve"};
        }
        auto& session = sessions_[receiver.str()];
        if (!session.channel) {
            // Cached token but no live channel: force a fresh cycle.
            cache_.drop(receiver);
            continue;
        }
        if (auto s = session.channel->send(
                Frame{FrameType::AppRequest, token->ciphertext, payload});
            !s) {
            session.channel.reset();
            cache_.drop(receiver);
            continue;
        }
        auto reply = session.channel->recv();
        if (!reply) {
            session.channel.reset();
            cache_.drop(receiver);
            continue;
        }
        if (reply->type == FrameType::AppResponse) {
            cache_.note_use(receiver);
            return reply->payload;
        }
        if (reply->type == FrameType::Error) {
            auto err = error_from_frame(*reply);
            bool retryable = err.message == token_reject_name(TokenReject::QuotaExceeded) ||
                             err.message == token_reject_name(TokenReject::Expired) ||
                             err.message == token_reject_name(TokenReject::UnknownToken);
            if (retryable && attempt == 0) {
                cache_.drop(receiver);
                continue;
            }
            return err;
        }
        return Error{ErrorCode::Internal, "unexpected frame type"};
    }
    return Error{ErrorCode::Internal, "request retry budget exhausted"};
}

Result<void> Initiator::release_token(const AgentId& receiver) {
    std::lock_guard lock(mu_);
    auto token = cache_.current(receiver);
    cache_.drop(receiver);
    if (!token) return {};
    auto it = sessions_.find(receiver.str());
    if (it == sessions_.end() || !it->second.channel) return {};
    auto& channel = *it->second.channel;
    json request = {{"op", "release"}};
    if (auto s = channel.send(
            Frame{FrameType::TokenRequest, token->ciphertext, to_bytes(request.dump())});
        !s)
        return s.error();
    auto reply = channel.recv();
    if (!reply) return reply.error();
    if (reply->type == FrameType::Error) return error_from_frame(*reply);
    return {};
}

}  // namespace pact
