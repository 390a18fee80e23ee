// Operator front end: provider daemon, agent daemon, user actions, and the
// reproduction harness. Thin single-threaded shell over the library.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "pact/agent.hpp"
#include "pact/harness.hpp"
#include "pact/provider.hpp"
#include "pact/registry.hpp"
#include "pact/transport.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pact;

namespace {

// One exit code per wire error code, so scripts can branch on failures.
int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::AuthFailed: return 10;
        case ErrorCode::Conflict: return 11;
        case ErrorCode::NotPermitted: return 12;
        case ErrorCode::QuotaExhausted: return 13;
        case ErrorCode::PoolExhausted: return 14;
        case ErrorCode::NotFound: return 15;
        case ErrorCode::BadSignature: return 16;
        case ErrorCode::Forbidden: return 17;
        case ErrorCode::NotHuman: return 18;
        default: return 20;
    }
}

int fail(const Error& err) {
    std::cerr << "error: " << error_code_name(err.code) << ": " << err.message << "\n";
    return exit_code_for(err.code);
}

int fail(const std::string& message) {
    std::cerr << "error: " << message << "\n";
    return 1;
}

struct HostPort {
    std::string host = "127.0.0.1";
    std::uint16_t port = 7700;
};

bool parse_host_port(const std::string& s, HostPort& out) {
    auto colon = s.rfind(':');
    if (colon == std::string::npos || colon + 1 >= s.size()) return false;
    out.host = s.substr(0, colon);
    try {
        out.port = static_cast<std::uint16_t>(std::stoul(s.substr(colon + 1)));
    } catch (...) {
        return false;
    }
    return true;
}

Result<json> read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) return Error{ErrorCode::NotFound, "cannot open " + path.string()};
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) return Error{ErrorCode::BadInput, "malformed JSON in " + path.string()};
    return j;
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

json sig_keys_to_json(const crypto::SigningKeyPair& k) {
    return {{"public", hex_encode(k.public_key)}, {"secret", hex_encode(k.secret_key)}};
}

bool sig_keys_from_json(const json& j, crypto::SigningKeyPair& k) {
    return hex_decode(j.value("public", ""), k.public_key) &&
           hex_decode(j.value("secret", ""), k.secret_key);
}

json ex_keys_to_json(const crypto::ExchangeKeyPair& k) {
    return {{"public", hex_encode(k.public_key)}, {"secret", hex_encode(k.secret_key)}};
}

bool ex_keys_from_json(const json& j, crypto::ExchangeKeyPair& k) {
    return hex_decode(j.value("public", ""), k.public_key) &&
           hex_decode(j.value("secret", ""), k.secret_key);
}

struct Trust {
    crypto::PublicKey ca_public{};
    crypto::PublicKey provider_public{};
};

Result<Trust> load_trust(const fs::path& path) {
    auto j = read_json_file(path);
    if (!j) return j.error();
    Trust t;
    if (!hex_decode(j->value("ca_public", ""), t.ca_public) ||
        !hex_decode(j->value("provider_public", ""), t.provider_public)) {
        return Error{ErrorCode::BadInput, "bad trust file " + path.string()};
    }
    return t;
}

void restrict_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    fs::permissions(dir, fs::perms::owner_all, fs::perm_options::replace, ec);
}

// ----------------------------------------------------------------- provider

int cmd_provider_serve(const std::string& listen, const fs::path& state_dir,
                       const std::vector<std::string>& denied, bool fast_hash) {
    HostPort hp;
    if (!parse_host_port(listen, hp)) return fail("bad --listen value: " + listen);
    restrict_dir(state_dir);

    // Long-term keys are created once and reused across restarts.
    crypto::SigningKeyPair provider_keys, ca_keys, tls_keys;
    const fs::path keys_path = state_dir / "keys.json";
    if (fs::exists(keys_path)) {
        auto j = read_json_file(keys_path);
        if (!j || !sig_keys_from_json((*j)["provider"], provider_keys) ||
            !sig_keys_from_json((*j)["ca"], ca_keys) ||
            !sig_keys_from_json((*j)["tls"], tls_keys)) {
            return fail("corrupt key file " + keys_path.string());
        }
    } else {
        provider_keys = crypto::keygen_sign();
        ca_keys = crypto::keygen_sign();
        tls_keys = crypto::keygen_sign();
        write_json_file(keys_path, json{{"provider", sig_keys_to_json(provider_keys)},
                                        {"ca", sig_keys_to_json(ca_keys)},
                                        {"tls", sig_keys_to_json(tls_keys)}});
    }
    CertificateAuthority ca(ca_keys);
    write_json_file(state_dir / "trust.json",
                    json{{"ca_public", hex_encode(ca.public_key())},
                         {"provider_public", hex_encode(provider_keys.public_key)}});

    auto verifier = std::make_shared<DenylistVerifier>();
    for (const auto& d : denied) verifier->deny(d);
    auto journal = std::make_shared<FileJournal>((state_dir / "journal.jsonl").string());
    RegistryConfig rc;
    rc.interactive_password_hash = !fast_hash;
    Registry registry(provider_keys, ca.public_key(), verifier, journal, rc);
    registry.replay();
    ProviderService service(registry, ca, tls_keys);

    TcpNetwork network;
    if (auto s = service.start(network, hp.host, hp.port); !s) {
        std::cerr << "error: cannot listen on " << hp.host << ":" << hp.port << ": "
                  << s.error().message << "\n";
        return exit_code_for(s.code());
    }
    std::cout << "provider listening on " << hp.host << ":" << service.port() << std::endl;
    for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
}

// ------------------------------------------------------------------- client

struct ClientContext {
    Trust trust;
    HostPort provider;
    TcpNetwork network;
};

Result<std::unique_ptr<ProviderClient>> connect_self_signed(ClientContext& ctx,
                                                            const std::string& subject) {
    return ProviderClient::connect(ctx.network, ctx.provider.host, ctx.provider.port,
                                   self_signed_channel_config(subject, ctx.trust.ca_public));
}

int cmd_user_register(ClientContext& ctx, const fs::path& identity_dir,
                      const std::string& user_id, const std::string& password) {
    restrict_dir(identity_dir);
    auto keys = crypto::keygen_sign();
    auto client = connect_self_signed(ctx, user_id);
    if (!client) return fail(client.error());
    auto cert = (*client)->issue_cert(user_id, keys.public_key);
    if (!cert) return fail(cert.error());
    if (auto r = (*client)->register_user(user_id, password, *cert); !r)
        return fail(r.error());
    write_json_file(identity_dir / "user.json",
                    json{{"user_id", user_id},
                         {"keys", sig_keys_to_json(keys)},
                         {"cert", json::parse(cert_to_json(*cert))}});
    std::cout << "registered user " << user_id << "\n";
    return 0;
}

struct UserFile {
    std::string user_id;
    crypto::SigningKeyPair keys;
    crypto::Certificate cert;
};

Result<UserFile> load_user(const fs::path& identity_dir) {
    auto j = read_json_file(identity_dir / "user.json");
    if (!j) return j.error();
    UserFile u;
    u.user_id = j->value("user_id", "");
    auto cert = cert_from_json((*j)["cert"].dump());
    if (!cert || !sig_keys_from_json((*j)["keys"], u.keys)) {
        return Error{ErrorCode::BadInput, "corrupt user.json"};
    }
    u.cert = *cert;
    return u;
}

fs::path agent_file(const fs::path& identity_dir, const std::string& name) {
    return identity_dir / "agents" / (name + ".json");
}

Result<void> load_agent_identity(const fs::path& identity_dir, const std::string& name,
                                 AgentIdentity& out) {
    auto j = read_json_file(agent_file(identity_dir, name));
    if (!j) return j.error();
    auto aid = AgentId::parse(j->value("agent_id", ""));
    auto ep = endpoint_from_json((*j)["endpoint"].dump());
    auto tls_cert = cert_from_json((*j)["tls_cert"].dump());
    auto owner_cert = cert_from_json((*j)["owner_cert"].dump());
    if (!aid || !ep || !tls_cert || !owner_cert ||
        !sig_keys_from_json((*j)["tls_keys"], out.tls_keys) ||
        !ex_keys_from_json((*j)["access_keys"], out.access_keys) ||
        !hex_decode(j->value("owner_signature", ""), out.owner_signature) ||
        !hex_decode(j->value("provider_signature", ""), out.provider_signature)) {
        return Error{ErrorCode::BadInput, "corrupt agent file for " + name};
    }
    out.agent_id = *aid;
    out.endpoint = *ep;
    out.tls_cert = *tls_cert;
    out.owner_cert = *owner_cert;
    for (const auto& o : (*j)["otks"]) {
        crypto::ExchangeKeyPair pair;
        if (ex_keys_from_json(o, pair)) out.otk_store.add(pair.public_key, pair.secret_key);
    }
    return {};
}

int cmd_agent_register(ClientContext& ctx, const fs::path& identity_dir,
                       const std::string& password, const std::string& agent_name,
                       const std::string& endpoint_str, const std::string& device,
                       const fs::path& policy_file, std::size_t otk_count) {
    auto user = load_user(identity_dir);
    if (!user) return fail(user.error());
    HostPort ep;
    if (!parse_host_port(endpoint_str, ep)) return fail("bad --endpoint value: " + endpoint_str);

    ContactPolicy policy;
    if (!policy_file.empty()) {
        std::ifstream in(policy_file);
        if (!in) return fail("cannot open policy file " + policy_file.string());
        std::stringstream ss;
        ss << in.rdbuf();
        auto parsed = policy_from_json(ss.str());
        if (!parsed) return fail(parsed.error());
        policy = *parsed;
    }

    AgentId aid{user->user_id, agent_name};
    auto tls_keys = crypto::keygen_sign();
    auto access_keys = crypto::keygen_exchange();
    auto client = connect_self_signed(ctx, user->user_id);
    if (!client) return fail(client.error());
    auto tls_cert = (*client)->issue_cert(aid.str(), tls_keys.public_key);
    if (!tls_cert) return fail(tls_cert.error());

    EndpointDescriptor descriptor{device, ep.host, ep.port};
    auto material = prepare_registration(user->keys.secret_key, aid, descriptor, policy,
                                         tls_keys, *tls_cert, access_keys,
                                         ctx.trust.provider_public, otk_count);
    auto sig = (*client)->register_agent(user->user_id, password, material.submission);
    if (!sig) return fail(sig.error());

    json otks = json::array();
    for (const auto& pair : material.otk_pairs) otks.push_back(ex_keys_to_json(pair));
    restrict_dir(identity_dir / "agents");
    write_json_file(agent_file(identity_dir, agent_name),
                    json{{"agent_id", aid.str()},
                         {"endpoint", json::parse(endpoint_to_json(descriptor))},
                         {"tls_keys", sig_keys_to_json(tls_keys)},
                         {"tls_cert", json::parse(cert_to_json(*tls_cert))},
                         {"access_keys", ex_keys_to_json(access_keys)},
                         {"owner_signature", hex_encode(material.submission.owner_signature)},
                         {"provider_signature", hex_encode(*sig)},
                         {"owner_cert", json::parse(cert_to_json(user->cert))},
                         {"otks", otks}});
    std::cout << "registered agent " << aid.str() << " with " << otk_count << " one-time keys\n";
    return 0;
}

int cmd_agent_serve(ClientContext& ctx, const fs::path& identity_dir,
                    const std::string& agent_name, std::uint32_t qmax,
                    std::int64_t lifetime) {
    AgentIdentity identity;
    if (auto r = load_agent_identity(identity_dir, agent_name, identity); !r)
        return fail(r.error());
    AgentRuntimeConfig cfg;
    cfg.token_params = TokenParams{lifetime, qmax};
    cfg.provider_public = ctx.trust.provider_public;
    cfg.ca_public = ctx.trust.ca_public;
    AgentRuntime runtime(identity, cfg, make_echo_handler());
    TcpNetwork network;
    if (auto s = runtime.start(network); !s) {
        std::cerr << "error: cannot listen on " << identity.endpoint.ip << ":"
                  << identity.endpoint.port << ": " << s.error().message << "\n";
        return exit_code_for(s.code());
    }
    std::cout << "agent " << identity.agent_id.str() << " listening on "
              << identity.endpoint.ip << ":" << runtime.port() << std::endl;
    for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
}

int cmd_agent_send(ClientContext& ctx, const fs::path& identity_dir,
                   const std::string& agent_name, const std::string& to,
                   const std::string& message, std::uint32_t count, bool release) {
    AgentIdentity identity;
    if (auto r = load_agent_identity(identity_dir, agent_name, identity); !r)
        return fail(r.error());
    auto receiver = AgentId::parse(to);
    if (!receiver) return fail(receiver.error());

    ChannelConfig cc;
    cc.local_cert = identity.tls_cert;
    cc.local_secret = identity.tls_keys.secret_key;
    cc.trusted_ca = ctx.trust.ca_public;
    auto client = ProviderClient::connect(ctx.network, ctx.provider.host, ctx.provider.port, cc);
    if (!client) return fail(client.error());

    InitiatorConfig icfg;
    icfg.provider_public = ctx.trust.provider_public;
    icfg.ca_public = ctx.trust.ca_public;
    Initiator initiator(identity, icfg, **client, ctx.network);
    for (std::uint32_t i = 0; i < count; ++i) {
        auto reply = initiator.send_request(*receiver, to_bytes(message));
        if (!reply) return fail(reply.error());
        std::cout << to_string(*reply) << "\n";
    }
    if (release) {
        if (auto r = initiator.release_token(*receiver); !r) return fail(r.error());
    }
    return 0;
}

int cmd_policy_update(ClientContext& ctx, const fs::path& identity_dir,
                      const std::string& password, const std::string& agent_name,
                      const fs::path& policy_file) {
    auto user = load_user(identity_dir);
    if (!user) return fail(user.error());
    std::ifstream in(policy_file);
    if (!in) return fail("cannot open policy file " + policy_file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    auto policy = policy_from_json(ss.str());
    if (!policy) return fail(policy.error());
    auto client = connect_self_signed(ctx, user->user_id);
    if (!client) return fail(client.error());
    AgentId aid{user->user_id, agent_name};
    if (auto r = (*client)->update_policy(user->user_id, password, aid, *policy); !r)
        return fail(r.error());
    std::cout << "policy updated for " << aid.str() << "\n";
    return 0;
}

int cmd_otks_refresh(ClientContext& ctx, const fs::path& identity_dir,
                     const std::string& password, const std::string& agent_name,
                     std::size_t count) {
    auto user = load_user(identity_dir);
    if (!user) return fail(user.error());
    AgentId aid{user->user_id, agent_name};
    auto batch = make_signed_otks(user->keys.secret_key, aid, count);
    auto client = connect_self_signed(ctx, user->user_id);
    if (!client) return fail(client.error());
    if (auto r = (*client)->refresh_otks(user->user_id, password, aid, batch.signed_otks); !r)
        return fail(r.error());

    // Keep the matching secrets so the serving agent can pick them up.
    auto path = agent_file(identity_dir, agent_name);
    if (auto j = read_json_file(path)) {
        for (const auto& pair : batch.pairs) (*j)["otks"].push_back(ex_keys_to_json(pair));
        write_json_file(path, *j);
    }
    std::cout << "added " << count << " one-time keys to " << aid.str() << "\n";
    return 0;
}

int cmd_agent_deactivate(ClientContext& ctx, const fs::path& identity_dir,
                         const std::string& password, const std::string& agent_name) {
    auto user = load_user(identity_dir);
    if (!user) return fail(user.error());
    auto client = connect_self_signed(ctx, user->user_id);
    if (!client) return fail(client.error());
    AgentId aid{user->user_id, agent_name};
    if (auto r = (*client)->deactivate_agent(user->user_id, password, aid); !r)
        return fail(r.error());
    std::cout << "deactivated " << aid.str() << "\n";
    return 0;
}

int cmd_counter_reset(ClientContext& ctx, const fs::path& identity_dir,
                      const std::string& password, const std::string& agent_name,
                      const std::string& initiator) {
    auto user = load_user(identity_dir);
    if (!user) return fail(user.error());
    auto init = AgentId::parse(initiator);
    if (!init) return fail(init.error());
    auto client = connect_self_signed(ctx, user->user_id);
    if (!client) return fail(client.error());
    AgentId aid{user->user_id, agent_name};
    if (auto r = (*client)->reset_counter(user->user_id, password, aid, *init); !r)
        return fail(r.error());
    std::cout << "counter reset for " << aid.str() << " <- " << initiator << "\n";
    return 0;
}

int cmd_registry_dump(ClientContext& ctx) {
    auto client = connect_self_signed(ctx, "observer");
    if (!client) return fail(client.error());
    auto dump = (*client)->dump();
    if (!dump) return fail(dump.error());
    std::cout << *dump << "\n";
    return 0;
}

// ------------------------------------------------------------------ harness

bool apply_guard_name(GuardToggles& toggles, const std::string& name) {
    if (name == "peer-cert") toggles.verify_peer_certificate = false;
    else if (name == "credential") toggles.require_access_credential = false;
    else if (name == "expiry") toggles.check_token_expiry = false;
    else if (name == "provider-sig") toggles.verify_provider_signature = false;
    else if (name == "holder") toggles.check_token_holder = false;
    else if (name == "policy") toggles.enforce_contact_policy = false;
    else if (name == "human") toggles.require_human_verification = false;
    else if (name == "quota") toggles.enforce_token_quota = false;
    else return false;
    return true;
}

int cmd_harness_attack(const std::string& scenario, std::uint64_t seed,
                       const std::string& format, const std::string& disable_guard) {
    GuardToggles toggles;
    if (!disable_guard.empty() && !apply_guard_name(toggles, disable_guard)) {
        return fail("unknown guard: " + disable_guard);
    }
    std::vector<std::string> ids;
    if (scenario == "all") {
        ids = harness::attack_scenarios();
    } else {
        const auto& known = harness::attack_scenarios();
        if (std::find(known.begin(), known.end(), scenario) == known.end()) {
            return fail("unknown scenario: " + scenario);
        }
        ids.push_back(scenario);
    }
    bool all_pass = true;
    for (const auto& id : ids) {
        auto report = harness::run_attack(id, toggles, seed);
        all_pass = all_pass && report.pass;
        if (format == "machine") {
            std::cout << harness::report_to_json(report) << "\n";
        } else {
            std::cout << report.scenario << ": " << (report.pass ? "PASS" : "FAIL")
                      << " expected=" << report.expected_step
                      << " detected=" << report.detected_at_step << " (" << report.detail
                      << ")\n";
        }
    }
    return all_pass ? 0 : 1;
}

int cmd_harness_overhead(std::uint32_t qmax, std::uint32_t m, double rtt, double t_crypto,
                         bool measured, std::uint64_t seed, const std::string& format) {
    auto model = harness::protocol_overhead(harness::OverheadModel{rtt, t_crypto, qmax, m});
    if (!model) return fail(model.error());
    json out = {{"q_max", qmax},
                {"m", m},
                {"rtt_ms", rtt},
                {"t_crypto_ms", t_crypto},
                {"cycles", model->cycles},
                {"total_ms", model->total_ms},
                {"amortized_ms", model->amortized_ms}};
    if (measured) {
        auto mo = harness::measured_overhead(qmax, m, rtt, seed);
        if (!mo) return fail(mo.error());
        out["measured_ms"] = mo->measured_ms;
        out["measured_cycles"] = mo->provider_cycles;
    }
    if (format == "machine") {
        std::cout << out.dump() << "\n";
    } else {
        std::cout << "cycles " << model->cycles << ", total " << model->total_ms
                  << " ms, amortized " << model->amortized_ms << " ms/request\n";
        if (measured) {
            std::cout << "measured " << out["measured_ms"].get<double>() << " ms over "
                      << out["measured_cycles"].get<std::uint64_t>() << " provider cycles\n";
        }
    }
    return 0;
}

int cmd_harness_capacity(double throughput, double lifetime, std::uint32_t measure,
                         const std::string& format) {
    json out = {{"lifetime_seconds", lifetime}};
    if (measure > 0) {
        auto t = harness::measure_provider_throughput(measure);
        if (!t) return fail(t.error());
        throughput = *t;
        out["measured_throughput_per_minute"] = throughput;
    }
    out["throughput_per_minute"] = throughput;
    out["capacity"] = harness::capacity(throughput, lifetime);
    if (format == "machine") {
        std::cout << out.dump() << "\n";
    } else {
        std::cout << "capacity " << out["capacity"].get<double>() << " agents ("
                  << throughput << "/min x " << lifetime << " s)\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"registry-mediated agent contact protocol"};
    app.require_subcommand(1);

    std::string provider_addr = "127.0.0.1:7700";
    std::string identity_dir = "identity";
    std::string trust_file = "trust.json";
    std::string password;
    std::string format = "human";
    std::uint64_t seed = 0;

    auto add_client_flags = [&](CLI::App* cmd) {
        cmd->add_option("--provider", provider_addr, "provider host:port");
        cmd->add_option("--identity-dir", identity_dir, "local key material directory");
        cmd->add_option("--trust", trust_file, "trust anchors file from the provider");
    };

    // provider serve
    auto* provider = app.add_subcommand("provider", "registry service");
    auto* pserve = provider->add_subcommand("serve", "run the provider daemon");
    std::string listen = "127.0.0.1:7700";
    std::string state_dir = "provider-state";
    std::vector<std::string> denied;
    bool fast_hash = false;
    pserve->add_option("--listen", listen, "host:port to bind");
    pserve->add_option("--state-dir", state_dir, "journal and key directory");
    pserve->add_option("--deny-user", denied, "user ids failing identity verification");
    pserve->add_flag("--insecure-fast-hash", fast_hash,
                     "weakest password hashing parameters (tests only)");

    // user register
    auto* user = app.add_subcommand("user", "user account actions");
    auto* ureg = user->add_subcommand("register", "create and register a user identity");
    std::string user_id;
    ureg->add_option("--user", user_id, "user id (name@domain)")->required();
    ureg->add_option("--password", password, "account password")->required();
    add_client_flags(ureg);

    // agent subcommands
    auto* agent = app.add_subcommand("agent", "agent lifecycle and traffic");
    std::string agent_name, endpoint_str = "127.0.0.1:7801", device = "cli", to, message = "ping";
    std::string policy_file;
    std::size_t otk_count = 10;
    std::uint32_t qmax = 10, count = 1;
    std::int64_t lifetime = 600;
    bool release = false;

    auto* areg = agent->add_subcommand("register", "register an agent under your user");
    areg->add_option("--agent", agent_name, "agent name")->required();
    areg->add_option("--password", password)->required();
    areg->add_option("--endpoint", endpoint_str, "agent ip:port");
    areg->add_option("--device", device, "device label");
    areg->add_option("--policy-file", policy_file, "contact policy JSON");
    areg->add_option("--otks", otk_count, "one-time key pool size");
    add_client_flags(areg);

    auto* aserve = agent->add_subcommand("serve", "run a receiving agent daemon");
    aserve->add_option("--agent", agent_name)->required();
    aserve->add_option("--qmax", qmax, "requests per issued token");
    aserve->add_option("--lifetime-seconds", lifetime, "token lifetime");
    add_client_flags(aserve);

    auto* asend = agent->add_subcommand("send", "send requests to another agent");
    asend->add_option("--agent", agent_name)->required();
    asend->add_option("--to", to, "receiver agent id")->required();
    asend->add_option("--message", message);
    asend->add_option("--count", count, "number of requests");
    asend->add_flag("--release", release, "release the token afterwards");
    add_client_flags(asend);

    auto* adeact = agent->add_subcommand("deactivate", "remove an agent from discovery");
    adeact->add_option("--agent", agent_name)->required();
    adeact->add_option("--password", password)->required();
    add_client_flags(adeact);

    // policy update
    auto* policy = app.add_subcommand("policy", "contact policy management");
    auto* pupdate = policy->add_subcommand("update", "replace an agent's contact policy");
    pupdate->add_option("--agent", agent_name)->required();
    pupdate->add_option("--password", password)->required();
    pupdate->add_option("--policy-file", policy_file)->required();
    add_client_flags(pupdate);

    // otks refresh
    auto* otks = app.add_subcommand("otks", "one-time key pool management");
    auto* orefresh = otks->add_subcommand("refresh", "sign and upload fresh one-time keys");
    orefresh->add_option("--agent", agent_name)->required();
    orefresh->add_option("--password", password)->required();
    orefresh->add_option("--otks", otk_count, "how many to add");
    add_client_flags(orefresh);

    // counter reset
    auto* counter = app.add_subcommand("counter", "pair counter management");
    auto* creset = counter->add_subcommand("reset", "clear the counter for one initiator");
    creset->add_option("--agent", agent_name)->required();
    creset->add_option("--password", password)->required();
    std::string initiator_id;
    creset->add_option("--initiator", initiator_id)->required();
    add_client_flags(creset);

    // registry dump
    auto* registry = app.add_subcommand("registry", "registry inspection");
    auto* rdump = registry->add_subcommand("dump", "print the public registry snapshot");
    add_client_flags(rdump);

    // harness
    auto* hrn = app.add_subcommand("harness", "reproduction harness");
    auto* hattack = hrn->add_subcommand("attack", "run adversarial scenarios");
    std::string scenario = "all", disable_guard;
    hattack->add_option("scenario", scenario, "A1..A8 or all");
    hattack->add_option("--seed", seed);
    hattack->add_option("--format", format, "human or machine");
    hattack->add_option("--disable-guard", disable_guard,
                        "mutation mode: peer-cert, credential, expiry, provider-sig, "
                        "holder, policy, human, quota");

    auto* hoverhead = hrn->add_subcommand("overhead", "contact overhead model");
    std::uint32_t m = 100;
    double rtt = 50.0, t_crypto = 7.0;
    bool measured = false;
    hoverhead->add_option("--qmax", qmax, "requests per token");
    hoverhead->add_option("--m", m, "total requests");
    hoverhead->add_option("--rtt", rtt, "round-trip time to the provider, ms");
    hoverhead->add_option("--t-crypto", t_crypto, "handshake crypto cost, ms");
    hoverhead->add_flag("--measured", measured, "also measure through the simulated stack");
    hoverhead->add_option("--seed", seed);
    hoverhead->add_option("--format", format);

    auto* hcapacity = hrn->add_subcommand("capacity", "supported population model");
    double throughput = 212000.0, cap_lifetime = 86400.0;
    std::uint32_t measure_iters = 0;
    hcapacity->add_option("--throughput-per-min", throughput, "issuances per minute");
    hcapacity->add_option("--lifetime-seconds", cap_lifetime, "token lifetime");
    hcapacity->add_option("--measure", measure_iters,
                          "measure local throughput over N issuances instead");
    hcapacity->add_option("--format", format);

    CLI11_PARSE(app, argc, argv);

    if (pserve->parsed()) return cmd_provider_serve(listen, state_dir, denied, fast_hash);

    auto make_context = [&]() -> Result<std::unique_ptr<ClientContext>> {
        auto ctx = std::make_unique<ClientContext>();
        auto trust = load_trust(trust_file);
        if (!trust) return trust.error();
        ctx->trust = *trust;
        if (!parse_host_port(provider_addr, ctx->provider)) {
            return Error{ErrorCode::BadInput, "bad --provider value: " + provider_addr};
        }
        return ctx;
    };

    if (hattack->parsed()) return cmd_harness_attack(scenario, seed, format, disable_guard);
    if (hoverhead->parsed())
        return cmd_harness_overhead(qmax, m, rtt, t_crypto, measured, seed, format);
    if (hcapacity->parsed())
        return cmd_harness_capacity(throughput, cap_lifetime, measure_iters, format);

    auto ctx = make_context();
    if (!ctx) return fail(ctx.error());
    ClientContext& c = **ctx;

    if (ureg->parsed()) return cmd_user_register(c, identity_dir, user_id, password);
    if (areg->parsed())
        return cmd_agent_register(c, identity_dir, password, agent_name, endpoint_str, device,
                                  policy_file, otk_count);
    if (aserve->parsed()) return cmd_agent_serve(c, identity_dir, agent_name, qmax, lifetime);
    if (asend->parsed())
        return cmd_agent_send(c, identity_dir, agent_name, to, message, count, release);
    if (adeact->parsed()) return cmd_agent_deactivate(c, identity_dir, password, agent_name);
    if (pupdate->parsed())
        return cmd_policy_update(c, identity_dir, password, agent_name, policy_file);
    if (orefresh->parsed())
        return cmd_otks_refresh(c, identity_dir, password, agent_name, otk_count);
    if (creset->parsed())
        return cmd_counter_reset(c, identity_dir, password, agent_name, initiator_id);
    if (rdump->parsed()) return cmd_registry_dump(c);

    std::cerr << app.help();
    return 2;
}
