#include "pact/provider.hpp"

#include "json.hpp"

namespace pact {

using nlohmann::json;

namespace {

json error_response(const Error& err) {
    return {{"ok", false},
            {"code", std::string(error_code_name(err.code))},
            {"message", err.message}};
}

json error_response(ErrorCode code, const std::string& message) {
    return error_response(Error{code, message});
}

Result<void> check_ok(const std::string& response) {
    auto j = json::parse(response, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        return Error{ErrorCode::BadInput, "malformed provider response"};
    }
    if (j.value("ok", false)) return {};
    auto code = error_code_from_name(j.value("code", ""));
    return Error{code.value_or(ErrorCode::Internal), j.value("message", "provider error")};
}

}  // namespace

ProviderService::ProviderService(Registry& registry, const CertificateAuthority& ca,
                                 crypto::SigningKeyPair tls_keys)
    : registry_(registry), ca_(ca), tls_keys_(std::move(tls_keys)) {
    tls_cert_ = ca_.issue(kProviderSubjectId, tls_keys_.public_key);
}

Result<void> ProviderService::start(Network& network, const std::string& ip,
                                    std::uint16_t port) {
    auto listener = network.listen(ip, port);
    if (!listener) return listener.error();
    listener_ = std::move(*listener);
    port_ = listener_->port();
    running_ = true;
    accept_thread_ = std::thread([this] { serve_loop(); });
    return {};
}

void ProviderService::stop() {
    if (!running_.exchange(false)) return;
    if (listener_) listener_->close();
    if (accept_thread_.joinable()) accept_thread_.join();
    {
        // Wake workers blocked on reads from still-open client connections.
        std::lock_guard lock(conn_mu_);
        for (auto* pipe : active_pipes_) pipe->close();
    }
    for (auto& w : workers_)
        if (w.joinable()) w.join();
    workers_.clear();
}

void ProviderService::serve_loop() {
    while (running_) {
        auto pipe = listener_->accept();
        if (!pipe) break;
        workers_.emplace_back([this, p = std::move(*pipe)]() mutable {
            handle_connection(std::move(p));
        });
    }
}

void ProviderService::handle_connection(std::unique_ptr<Pipe> pipe) {
    ChannelConfig config;
    config.local_cert = tls_cert_;
    config.local_secret = tls_keys_.secret_key;
    config.trusted_ca = ca_.public_key();
    config.allow_unverified_peer = true;  // bootstrap ops are gated per-request

    Pipe* raw = pipe.get();
    {
        std::lock_guard lock(conn_mu_);
        active_pipes_.insert(raw);
    }
    auto channel = SecureChannel::accept(std::move(pipe), config);
    if (channel) {
        auto& ch = **channel;
        while (running_) {
            auto frame = ch.recv();
            if (!frame) break;
            if (frame->type != FrameType::AppRequest) {
                ch.send(Frame{FrameType::Error, {},
                              to_bytes(error_response(ErrorCode::BadInput, "expected request")
                                           .dump())});
                continue;
            }
            auto response = handle_request(to_string(frame->payload), ch.remote_id(),
                                           ch.remote_verified());
            if (!ch.send(Frame{FrameType::AppResponse, {}, to_bytes(response)})) break;
        }
    }
    std::lock_guard lock(conn_mu_);
    active_pipes_.erase(raw);
}

std::string ProviderService::handle_request(const std::string& payload,
                                            const std::string& channel_id,
                                            bool channel_verified) {
    auto j = json::parse(payload, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        return error_response(ErrorCode::BadInput, "malformed request").dump();
    }
    const std::string op = j.value("op", "");
    try {
        if (op == "provider_info") {
            return json{{"ok", true},
                        {"provider_public", hex_encode(registry_.provider_public())},
                        {"ca_public", hex_encode(ca_.public_key())}}
                .dump();
        }
        if (op == "issue_cert") {
            crypto::PublicKey pk;
            if (!hex_decode(j.at("subject_public").get<std::string>(), pk)) {
                return error_response(ErrorCode::BadInput, "bad subject key").dump();
            }
            auto cert = ca_.issue(j.at("subject_id").get<std::string>(), pk);
            return json{{"ok", true}, {"cert", json::parse(cert_to_json(cert))}}.dump();
        }
        if (op == "register_user") {
            auto cert = cert_from_json(j.at("cert").dump());
            if (!cert) return error_response(cert.error()).dump();
            auto r = registry_.register_user(j.at("user_id").get<std::string>(),
                                             j.at("password").get<std::string>(), *cert);
            if (!r) return error_response(r.error()).dump();
            return json{{"ok", true}}.dump();
        }
        if (op == "register_agent") {
            auto sub = submission_from_json(j.at("submission").dump());
            if (!sub) return error_response(sub.error()).dump();
            auto r = registry_.register_agent(j.at("user_id").get<std::string>(),
                                              j.at("password").get<std::string>(), *sub);
            if (!r) return error_response(r.error()).dump();
            return json{{"ok", true}, {"provider_signature", hex_encode(*r)}}.dump();
        }
        if (op == "resolve_contact") {
            // Initiator identity comes from the channel certificate, never
            // from the request body.
            if (!channel_verified) {
                return error_response(ErrorCode::AuthFailed,
                                      "resolve requires a CA-signed agent certificate")
                    .dump();
            }
            auto initiator = AgentId::parse(channel_id);
            if (!initiator) {
                return error_response(ErrorCode::AuthFailed, "channel is not an agent").dump();
            }
            auto receiver = AgentId::parse(j.at("receiver").get<std::string>());
            if (!receiver) return error_response(receiver.error()).dump();
            auto r = registry_.resolve_contact(*initiator, *receiver);
            if (!r) return error_response(r.error()).dump();
            return json{{"ok", true}, {"grant", json::parse(grant_to_json(*r))}}.dump();
        }
        if (op == "update_policy") {
            auto agent_id = AgentId::parse(j.at("agent_id").get<std::string>());
            if (!agent_id) return error_response(agent_id.error()).dump();
            auto policy = policy_from_json(j.at("policy").dump());
            if (!policy) return error_response(policy.error()).dump();
            auto r = registry_.update_policy(j.at("user_id").get<std::string>(),
                                             j.at("password").get<std::string>(), *agent_id,
                                             *policy);
            if (!r) return error_response(r.error()).dump();
            return json{{"ok", true}}.dump();
        }
        if (op == "reset_counter") {
            auto agent_id = AgentId::parse(j.at("agent_id").get<std::string>());
            if (!agent_id) return error_response(agent_id.error()).dump();
            auto initiator = AgentId::parse(j.at("initiator").get<std::string>());
            if (!initiator) return error_response(initiator.error()).dump();
            auto r = registry_.reset_counter(j.at("user_id").get<std::string>(),
                                             j.at("password").get<std::string>(), *agent_id,
                                             *initiator);
            if (!r) return error_response(r.error()).dump();
            return json{{"ok", true}}.dump();
        }
        if (op == "refresh_otks") {
            auto agent_id = AgentId::parse(j.at("agent_id").get<std::string>());
            if (!agent_id) return error_response(agent_id.error()).dump();
            std::vector<SignedOtk> otks;
            for (const auto& jo : j.at("otks")) {
                SignedOtk o;
                if (!hex_decode(jo.at("otk").get<std::string>(), o.otk) ||
                    !hex_decode(jo.at("owner_signature").get<std::string>(),
                                o.owner_signature)) {
                    return error_response(ErrorCode::BadInput, "bad otk hex").dump();
                }
                otks.push_back(o);
            }
            auto r = registry_.refresh_otks(j.at("user_id").get<std::string>(),
                                            j.at("password").get<std::string>(), *agent_id,
                                            otks);
            if (!r) return error_response(r.error()).dump();
            return json{{"ok", true}}.dump();
        }
        if (op == "deactivate_agent") {
            auto agent_id = AgentId::parse(j.at("agent_id").get<std::string>());
            if (!agent_id) return error_response(agent_id.error()).dump();
            auto r = registry_.deactivate_agent(j.at("user_id").get<std::string>(),
                                                j.at("password").get<std::string>(),
                                                *agent_id);
            if (!r) return error_response(r.error()).dump();
            return json{{"ok", true}}.dump();
        }
        if (op == "dump") {
            return json{{"ok", true}, {"dump", registry_.dump()}}.dump();
        }
    } catch (const json::exception& e) {
        return error_response(ErrorCode::BadInput, e.what()).dump();
    }
    return error_response(ErrorCode::BadInput, "unknown op: " + op).dump();
}

Result<std::unique_ptr<ProviderClient>> ProviderClient::connect(Network& network,
                                                                const std::string& ip,
                                                                std::uint16_t port,
                                                                const ChannelConfig& config) {
    auto pipe = network.connect(ip, port);
    if (!pipe) return pipe.error();
    auto channel = SecureChannel::connect(std::move(*pipe), config, kProviderSubjectId);
    if (!channel) return channel.error();
    return std::unique_ptr<ProviderClient>(new ProviderClient(std::move(*channel)));
}

Result<std::string> ProviderClient::call(const std::string& request_json) {
    if (auto s = channel_->send(Frame{FrameType::AppRequest, {}, to_bytes(request_json)}); !s)
        return s.error();
    auto frame = channel_->recv();
    if (!frame) return frame.error();
    return to_string(frame->payload);
}

Result<crypto::Certificate> ProviderClient::issue_cert(const std::string& subject_id,
                                                       const crypto::PublicKey& pk) {
    auto r = call(json{{"op", "issue_cert"},
                       {"subject_id", subject_id},
                       {"subject_public", hex_encode(pk)}}
                      .dump());
    if (!r) return r.error();
    if (auto ok = check_ok(*r); !ok) return ok.error();
    return cert_from_json(json::parse(*r).at("cert").dump());
}

Result<crypto::PublicKey> ProviderClient::provider_public() {
    auto r = call(json{{"op", "provider_info"}}.dump());
    if (!r) return r.error();
    if (auto ok = check_ok(*r); !ok) return ok.error();
    crypto::PublicKey pk;
    if (!hex_decode(json::parse(*r).at("provider_public").get<std::string>(), pk)) {
        return Error{ErrorCode::BadInput, "bad provider key"};
    }
    return pk;
}

Result<void> ProviderClient::register_user(const std::string& user_id,
                                           const std::string& password,
                                           const crypto::Certificate& cert) {
    auto r = call(json{{"op", "register_user"},
                       {"user_id", user_id},
                       {"password", password},
                       {"cert", json::parse(cert_to_json(cert))}}
                      .dump());
    if (!r) return r.error();
    return check_ok(*r);
}

Result<crypto::Signature> ProviderClient::register_agent(const std::string& user_id,
                                                         const std::string& password,
                                                         const AgentSubmission& submission) {
    auto r = call(json{{"op", "register_agent"},
                       {"user_id", user_id},
                       {"password", password},
                       {"submission", json::parse(submission_to_json(submission))}}
                      .dump());
    if (!r) return r.error();
    if (auto ok = check_ok(*r); !ok) return ok.error();
    crypto::Signature sig;
    if (!hex_decode(json::parse(*r).at("provider_signature").get<std::string>(), sig)) {
        return Error{ErrorCode::BadInput, "bad provider signature hex"};
    }
    return sig;
}

Result<ContactGrant> ProviderClient::resolve_contact(const AgentId& receiver) {
    auto r = call(json{{"op", "resolve_contact"}, {"receiver", receiver.str()}}.dump());
    if (!r) return r.error();
    if (auto ok = check_ok(*r); !ok) return ok.error();
    return grant_from_json(json::parse(*r).at("grant").dump());
}

Result<void> ProviderClient::update_policy(const std::string& user_id,
                                           const std::string& password,
                                           const AgentId& agent_id,
                                           const ContactPolicy& policy) {
    auto r = call(json{{"op", "update_policy"},
                       {"user_id", user_id},
                       {"password", password},
                       {"agent_id", agent_id.str()},
                       {"policy", json::parse(policy_to_json(policy))}}
                      .dump());
    if (!r) return r.error();
    return check_ok(*r);
}

Result<void> ProviderClient::reset_counter(const std::string& user_id,
                                           const std::string& password,
                                           const AgentId& agent_id,
                                           const AgentId& initiator) {
    auto r = call(json{{"op", "reset_counter"},
                       {"user_id", user_id},
                       {"password", password},
                       {"agent_id", agent_id.str()},
                       {"initiator", initiator.str()}}
                      .dump());
    if (!r) return r.error();
    return check_ok(*r);
}

Result<void> ProviderClient::refresh_otks(const std::string& user_id,
                                          const std::string& password,
                                          const AgentId& agent_id,
                                          const std::vector<SignedOtk>& otks) {
    json arr = json::array();
    for (const auto& o : otks) {
        arr.push_back({{"otk", hex_encode(o.otk)},
                       {"owner_signature", hex_encode(o.owner_signature)}});
    }
    auto r = call(json{{"op", "refresh_otks"},
                       {"user_id", user_id},
                       {"password", password},
                       {"agent_id", agent_id.str()},
                       {"otks", arr}}
                      .dump());
    if (!r) return r.error();
    return check_ok(*r);
}

Result<void> ProviderClient::deactivate_agent(const std::string& user_id,
                                              const std::string& password,
                                              const AgentId& agent_id) {
    auto r = call(json{{"op", "deactivate_agent"},
                       {"user_id", user_id},
                       {"password", password},
                       {"agent_id", agent_id.str()}}
                      .dump());
    if (!r) return r.error();
    return check_ok(*r);
}

Result<std::string> ProviderClient::dump() {
    auto r = call(json{{"op", "dump"}}.dump());
    if (!r) return r.error();
    if (auto ok = check_ok(*r); !ok) return ok.error();
    return json::parse(*r).at("dump").get<std::string>();
}

ChannelConfig self_signed_channel_config(const std::string& subject_id,
                                         const crypto::PublicKey& trusted_ca) {
    auto keys = crypto::keygen_sign();
    ChannelConfig config;
    config.local_cert = crypto::make_certificate(keys.secret_key, subject_id, keys.public_key);
    config.local_secret = keys.secret_key;
    config.trusted_ca = trusted_ca;
    return config;
}

}  // namespace pact
