#include "pact/registry.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace pact {

using nlohmann::json;

void FileJournal::append(const std::string& json_line) {
    std::ofstream out(path_, std::ios::app);
    out << json_line << '\n';
    out.flush();
}

std::vector<std::string> FileJournal::load() {
    std::vector<std::string> lines;
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

namespace {

std::string pair_key(const AgentId& receiver, const AgentId& initiator) {
    return receiver.str() + "|" + initiator.str();
}

json agent_to_json_obj(const AgentRecord& rec) {
    json pool = json::array();
    for (const auto& p : rec.otk_pool) {
        pool.push_back({{"otk", hex_encode(p.signed_otk.otk)},
                        {"sig", hex_encode(p.signed_otk.owner_signature)},
                        {"consumed", p.consumed}});
    }
    return {{"agent_id", rec.agent_id.str()},
            {"owner", rec.owner},
            {"endpoint", json::parse(endpoint_to_json(rec.endpoint))},
            {"tls_cert", json::parse(cert_to_json(rec.tls_cert))},
            {"access_public", hex_encode(rec.access_public)},
            {"otk_pool", pool},
            {"policy", json::parse(policy_to_json(rec.policy))},
            {"owner_signature", hex_encode(rec.owner_signature)},
            {"provider_signature", hex_encode(rec.provider_signature)},
            {"active", rec.active}};
}

AgentRecord agent_from_json_obj(const json& j) {
    AgentRecord rec;
    rec.agent_id = *AgentId::parse(j.at("agent_id").get<std::string>());
    rec.owner = j.at("owner").get<std::string>();
    rec.endpoint = *endpoint_from_json(j.at("endpoint").dump());
    rec.tls_cert = *cert_from_json(j.at("tls_cert").dump());
    hex_decode(j.at("access_public").get<std::string>(), rec.access_public);
    for (const auto& p : j.at("otk_pool")) {
        PooledOtk po;
        hex_decode(p.at("otk").get<std::string>(), po.signed_otk.otk);
        hex_decode(p.at("sig").get<std::string>(), po.signed_otk.owner_signature);
        po.consumed = p.at("consumed").get<bool>();
        rec.otk_pool.push_back(po);
    }
    rec.policy = *policy_from_json(j.at("policy").dump());
    hex_decode(j.at("owner_signature").get<std::string>(), rec.owner_signature);
    hex_decode(j.at("provider_signature").get<std::string>(), rec.provider_signature);
    rec.active = j.at("active").get<bool>();
    return rec;
}

}  // namespace

Registry::Registry(crypto::SigningKeyPair provider_keys, crypto::PublicKey ca_public,
                   std::shared_ptr<HumanVerifier> verifier, std::shared_ptr<Journal> journal,
                   RegistryConfig config)
    : provider_keys_(std::move(provider_keys)),
      ca_public_(ca_public),
      verifier_(verifier ? std::move(verifier) : std::make_shared<DenylistVerifier>()),
      journal_(journal ? std::move(journal) : std::make_shared<MemoryJournal>()),
      config_(config) {
    replay();
}

void Registry::replay() {
    auto lines = journal_->load();
    std::lock_guard lock(mu_);
    for (const auto& line : lines) {
        apply_journal_line(line);
    }
}

void Registry::apply_journal_line(const std::string& line) {
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) return;
    const std::string op = j.value("op", "");
    if (op == "put_user") {
        UserRecord rec;
        rec.user_id = j.at("user_id").get<std::string>();
        rec.password_verifier = j.at("verifier").get<std::string>();
        rec.certificate = *cert_from_json(j.at("cert").dump());
        users_[rec.user_id] = std::move(rec);
    } else if (op == "put_agent") {
        AgentRecord rec = agent_from_json_obj(j.at("agent"));
        endpoints_in_use_[rec.endpoint.key()] = rec.agent_id.str();
        agents_[rec.agent_id.str()] = std::move(rec);
    } else if (op == "consume_otk") {
        auto it = agents_.find(j.at("agent_id").get<std::string>());
        std::size_t index = j.at("index").get<std::size_t>();
        if (it != agents_.end() && index < it->second.otk_pool.size()) {
            it->second.otk_pool[index].consumed = true;
        }
    } else if (op == "set_counter") {
        counters_[j.at("key").get<std::string>()] = j.at("value").get<int>();
    } else if (op == "erase_counter") {
        counters_.erase(j.at("key").get<std::string>());
    }
}

Result<void> Registry::register_user(const std::string& user_id, const std::string& password,
                                     const crypto::Certificate& certificate) {
    if (config_.toggles.require_human_verification && !verifier_->approve(user_id)) {
        return Error{ErrorCode::NotHuman, "identity verification failed for " + user_id};
    }
    if (certificate.subject_id != user_id ||
        !crypto::verify_certificate(ca_public_, certificate)) {
        return Error{ErrorCode::BadSignature, "user certificate does not verify"};
    }
    std::string verifier =
        crypto::password_hash(password, config_.interactive_password_hash);

    std::lock_guard lock(mu_);
    if (users_.contains(user_id)) {
        return Error{ErrorCode::Conflict, "user already registered: " + user_id};
    }
    UserRecord rec{user_id, verifier, certificate};
    journal_->append(json{{"op", "put_user"},
                          {"user_id", user_id},
                          {"verifier", verifier},
                          {"cert", json::parse(cert_to_json(certificate))}}
                         .dump());
    users_[user_id] = std::move(rec);
    return {};
}

Result<const UserRecord*> Registry::authenticate_locked(const std::string& user_id,
                                                        const std::string& password) const {
    auto it = users_.find(user_id);
    if (it == users_.end() || !crypto::password_verify(it->second.password_verifier, password)) {
        return Error{ErrorCode::AuthFailed, "bad user credentials"};
    }
    return &it->second;
}

Result<AgentRecord*> Registry::owned_agent_locked(const std::string& user_id,
                                                  const AgentId& agent_id) {
    auto it = agents_.find(agent_id.str());
    if (it == agents_.end()) {
        return Error{ErrorCode::NotFound, "no such agent: " + agent_id.str()};
    }
    if (it->second.owner != user_id) {
        return Error{ErrorCode::Forbidden, "agent owned by another user"};
    }
    return &it->second;
}

void Registry::journal_put_agent_locked(const AgentRecord& rec) {
    journal_->append(json{{"op", "put_agent"}, {"agent", agent_to_json_obj(rec)}}.dump());
}

Result<crypto::Signature> Registry::register_agent(const std::string& user_id,
                                                   const std::string& password,
                                                   const AgentSubmission& sub) {
    std::lock_guard lock(mu_);
    auto user = authenticate_locked(user_id, password);
    if (!user) return user.error();
    const crypto::PublicKey& owner_pk = (*user)->certificate.subject_public;

    if (sub.agent_id.user_id != user_id) {
        return Error{ErrorCode::Forbidden, "agent id not under this user"};
    }
    if (agents_.contains(sub.agent_id.str())) {
        return Error{ErrorCode::Conflict, "agent id already registered"};
    }
    if (endpoints_in_use_.contains(sub.endpoint.key())) {
        return Error{ErrorCode::Conflict, "endpoint already in use: " + sub.endpoint.key()};
    }
    if (auto v = validate_policy(sub.policy); !v) return v.error();
    if (sub.tls_cert.subject_id != sub.agent_id.str() ||
        !crypto::verify_certificate(ca_public_, sub.tls_cert)) {
        return Error{ErrorCode::BadSignature, "agent TLS certificate does not verify"};
    }
    Bytes binding = agent_binding_tbs(sub.agent_id, sub.endpoint, sub.tls_cert.subject_public,
                                      sub.access_public, provider_keys_.public_key);
    if (!crypto::verify(owner_pk, binding, sub.owner_signature)) {
        return Error{ErrorCode::BadSignature, "owner signature over agent binding"};
    }
    for (std::size_t i = 0; i < sub.otks.size(); ++i) {
        if (!crypto::verify(owner_pk, otk_binding_tbs(sub.agent_id, sub.otks[i].otk),
                            sub.otks[i].owner_signature)) {
            return Error{ErrorCode::BadSignature, "OTK signature at index " + std::to_string(i)};
        }
    }

    AgentRecord rec;
    rec.agent_id = sub.agent_id;
    rec.owner = user_id;
    rec.endpoint = sub.endpoint;
    rec.tls_cert = sub.tls_cert;
    rec.access_public = sub.access_public;
    for (const auto& o : sub.otks) rec.otk_pool.push_back({o, false});
    rec.policy = sub.policy;
    rec.owner_signature = sub.owner_signature;
    rec.provider_signature = crypto::sign(
        provider_keys_.secret_key,
        provider_attestation_tbs(sub.agent_id, sub.tls_cert, sub.endpoint, sub.access_public,
                                 sub.owner_signature));
    rec.active = true;

    journal_put_agent_locked(rec);
    endpoints_in_use_[rec.endpoint.key()] = rec.agent_id.str();
    auto sig = rec.provider_signature;
    agents_[rec.agent_id.str()] = std::move(rec);
    return sig;
}

Result<ContactGrant> Registry::resolve_contact(const AgentId& initiator,
                                               const AgentId& receiver) {
    std::lock_guard lock(mu_);
    auto it = agents_.find(receiver.str());
    if (it == agents_.end() || !it->second.active) {
        return Error{ErrorCode::NotFound, "no active agent: " + receiver.str()};
    }
    AgentRecord& rec = it->second;

    int budget = otk_budget(rec.policy, initiator);
    if (budget == -1) {
        if (config_.toggles.enforce_contact_policy) {
            return Error{ErrorCode::NotPermitted,
                         "contact policy denies " + initiator.str()};
        }
        budget = std::numeric_limits<int>::max();  // guard disabled (harness only)
    }

    const std::string key = pair_key(receiver, initiator);
    auto [counter_it, fresh] = counters_.try_emplace(key, budget);
    if (fresh) {
        journal_->append(
            json{{"op", "set_counter"}, {"key", key}, {"value", budget}}.dump());
    }
    if (counter_it->second <= 0) {
        return Error{ErrorCode::QuotaExhausted, "OTK quota exhausted for pair"};
    }

    std::size_t index = 0;
    for (; index < rec.otk_pool.size(); ++index) {
        if (!rec.otk_pool[index].consumed) break;
    }
    if (index == rec.otk_pool.size()) {
        return Error{ErrorCode::PoolExhausted, "OTK pool empty; owner must refresh"};
    }

    // Consume-and-decrement is atomic under the registry lock.
    rec.otk_pool[index].consumed = true;
    counter_it->second -= 1;
    journal_->append(json{{"op", "consume_otk"},
                          {"agent_id", receiver.str()},
                          {"index", index}}
                         .dump());
    journal_->append(
        json{{"op", "set_counter"}, {"key", key}, {"value", counter_it->second}}.dump());

    ContactGrant grant;
    grant.owner_cert = users_.at(rec.owner).certificate;
    grant.agent_id = rec.agent_id;
    grant.endpoint = rec.endpoint;
    grant.tls_cert = rec.tls_cert;
    grant.access_public = rec.access_public;
    grant.otk = rec.otk_pool[index].signed_otk.otk;
    grant.otk_signature = rec.otk_pool[index].signed_otk.owner_signature;
    grant.agent_signature = rec.owner_signature;
    resolve_successes_.fetch_add(1);
    return grant;
}

Result<void> Registry::update_policy(const std::string& user_id, const std::string& password,
                                     const AgentId& agent_id, const ContactPolicy& new_policy) {
    std::lock_guard lock(mu_);
    auto user = authenticate_locked(user_id, password);
    if (!user) return user.error();
    auto agent = owned_agent_locked(user_id, agent_id);
    if (!agent) return agent.error();
    if (auto v = validate_policy(new_policy); !v) return v.error();

    (*agent)->policy = new_policy;
    journal_put_agent_locked(**agent);

    // Counters are clamped down, never raised; an explicit reset_counter is
    // the only way to widen an in-flight pair.
    const std::string prefix = agent_id.str() + "|";
    for (auto& [key, remaining] : counters_) {
        if (key.rfind(prefix, 0) != 0) continue;
        auto initiator = AgentId::parse(key.substr(prefix.size()));
        if (!initiator) continue;
        int budget = otk_budget(new_policy, *initiator);
        int clamped = budget < 0 ? 0 : std::min(remaining, budget);
        if (clamped != remaining) {
            remaining = clamped;
            journal_->append(
                json{{"op", "set_counter"}, {"key", key}, {"value", clamped}}.dump());
        }
    }
    return {};
}

Result<void> Registry::reset_counter(const std::string& user_id, const std::string& password,
                                     const AgentId& agent_id, const AgentId& initiator) {
    std::lock_guard lock(mu_);
    auto user = authenticate_locked(user_id, password);
    if (!user) return user.error();
    auto agent = owned_agent_locked(user_id, agent_id);
    if (!agent) return agent.error();
    const std::string key = pair_key(agent_id, initiator);
    counters_.erase(key);
    journal_->append(json{{"op", "erase_counter"}, {"key", key}}.dump());
    return {};
}

Result<void> Registry::refresh_otks(const std::string& user_id, const std::string& password,
                                    const AgentId& agent_id,
                                    const std::vector<SignedOtk>& otks) {
    std::lock_guard lock(mu_);
    auto user = authenticate_locked(user_id, password);
    if (!user) return user.error();
    auto agent = owned_agent_locked(user_id, agent_id);
    if (!agent) return agent.error();
    const crypto::PublicKey& owner_pk = (*user)->certificate.subject_public;

    // Whole batch verified before any mutation.
    for (std::size_t i = 0; i < otks.size(); ++i) {
        if (!crypto::verify(owner_pk, otk_binding_tbs(agent_id, otks[i].otk),
                            otks[i].owner_signature)) {
            return Error{ErrorCode::BadSignature, "OTK signature at index " + std::to_string(i)};
        }
    }
    auto& pool = (*agent)->otk_pool;
    std::erase_if(pool, [](const PooledOtk& p) { return p.consumed; });
    for (const auto& o : otks) pool.push_back({o, false});
    journal_put_agent_locked(**agent);
    return {};
}

Result<void> Registry::deactivate_agent(const std::string& user_id,
                                        const std::string& password,
                                        const AgentId& agent_id) {
    std::lock_guard lock(mu_);
    auto user = authenticate_locked(user_id, password);
    if (!user) return user.error();
    auto agent = owned_agent_locked(user_id, agent_id);
    if (!agent) return agent.error();
    (*agent)->active = false;
    journal_put_agent_locked(**agent);
    return {};
}

Result<void> Registry::audit() const {
    std::lock_guard lock(mu_);
    for (const auto& [uid, user] : users_) {
        if (!crypto::verify_certificate(ca_public_, user.certificate)) {
            return Error{ErrorCode::BadSignature, "user certificate: " + uid};
        }
    }
    for (const auto& [aid, rec] : agents_) {
        auto owner_it = users_.find(rec.owner);
        if (owner_it == users_.end()) {
            return Error{ErrorCode::Internal, "orphaned agent: " + aid};
        }
        const crypto::PublicKey& owner_pk = owner_it->second.certificate.subject_public;
        if (!crypto::verify_certificate(ca_public_, rec.tls_cert)) {
            return Error{ErrorCode::BadSignature, "agent TLS certificate: " + aid};
        }
        if (!crypto::verify(owner_pk,
                            agent_binding_tbs(rec.agent_id, rec.endpoint,
                                              rec.tls_cert.subject_public, rec.access_public,
                                              provider_keys_.public_key),
                            rec.owner_signature)) {
            return Error{ErrorCode::BadSignature, "owner signature: " + aid};
        }
        for (const auto& p : rec.otk_pool) {
            if (!crypto::verify(owner_pk, otk_binding_tbs(rec.agent_id, p.signed_otk.otk),
                                p.signed_otk.owner_signature)) {
                return Error{ErrorCode::BadSignature, "pooled OTK signature: " + aid};
            }
        }
        if (!crypto::verify(provider_keys_.public_key,
                            provider_attestation_tbs(rec.agent_id, rec.tls_cert, rec.endpoint,
                                                     rec.access_public, rec.owner_signature),
                            rec.provider_signature)) {
            return Error{ErrorCode::BadSignature, "provider signature: " + aid};
        }
    }
    return {};
}

std::string Registry::dump() const {
    std::lock_guard lock(mu_);
    json users = json::array();
    for (const auto& [uid, user] : users_) {
        users.push_back({{"user_id", uid}, {"cert", json::parse(cert_to_json(user.certificate))}});
    }
    json agents = json::array();
    for (const auto& [aid, rec] : agents_) {
        agents.push_back(agent_to_json_obj(rec));
    }
    json counters = json::object();
    for (const auto& [key, value] : counters_) counters[key] = value;
    return json{{"users", users}, {"agents", agents}, {"counters", counters}}.dump(2);
}

std::size_t Registry::unconsumed_otk_count(const AgentId& agent_id) const {
    std::lock_guard lock(mu_);
    auto it = agents_.find(agent_id.str());
    if (it == agents_.end()) return 0;
    std::size_t n = 0;
    for (const auto& p : it->second.otk_pool)
        if (!p.consumed) ++n;
    return n;
}

int Registry::pair_counter(const AgentId& receiver, const AgentId& initiator) const {
    std::lock_guard lock(mu_);
    auto it = counters_.find(pair_key(receiver, initiator));
    return it == counters_.end() ? -1 : it->second;
}

}  // namespace pact
