#include "pact/messages.hpp"

#include "json.hpp"

namespace pact {

using nlohmann::json;

Bytes agent_binding_tbs(const AgentId& aid, const EndpointDescriptor& ed,
                        const crypto::PublicKey& tls_public,
                        const crypto::ExchangePublicKey& access_public,
                        const crypto::PublicKey& provider_public) {
    return Encoder{}
        .field("pact/agent-binding")
        .field(aid.str())
        .field(ed.device)
        .field(ed.ip)
        .field_u64(ed.port)
        .field(tls_public)
        .field(access_public)
        .field(provider_public)
        .take();
}

Bytes otk_binding_tbs(const AgentId& aid, const crypto::ExchangePublicKey& otk) {
    return Encoder{}.field("pact/otk-binding").field(aid.str()).field(otk).take();
}

Bytes provider_attestation_tbs(const AgentId& aid, const crypto::Certificate& tls_cert,
                               const EndpointDescriptor& ed,
                               const crypto::ExchangePublicKey& access_public,
                               const crypto::Signature& owner_signature) {
    return Encoder{}
        .field("pact/provider-attest")
        .field(aid.str())
        .field(tls_cert.subject_id)
        .field(tls_cert.subject_public)
        .field(tls_cert.issuer_signature)
        .field(ed.device)
        .field(ed.ip)
        .field_u64(ed.port)
        .field(access_public)
        .field(owner_signature)
        .take();
}

namespace {

json ed_to(const EndpointDescriptor& ed) {
    return {{"device", ed.device}, {"ip", ed.ip}, {"port", ed.port}};
}

Result<EndpointDescriptor> ed_from(const json& j) {
    if (!j.is_object() || !j.contains("device") || !j.contains("ip") || !j.contains("port"))
        return Error{ErrorCode::BadInput, "bad endpoint descriptor"};
    EndpointDescriptor ed;
    ed.device = j["device"].get<std::string>();
    ed.ip = j["ip"].get<std::string>();
    int port = j["port"].get<int>();
    if (port < 1 || port > 65535) return Error{ErrorCode::BadInput, "port out of range"};
    ed.port = static_cast<std::uint16_t>(port);
    return ed;
}

json cert_to(const crypto::Certificate& c) {
    return {{"subject_id", c.subject_id},
            {"subject_public", hex_encode(c.subject_public)},
            {"issuer_signature", hex_encode(c.issuer_signature)}};
}

Result<crypto::Certificate> cert_from(const json& j) {
    crypto::Certificate c;
    if (!j.is_object()) return Error{ErrorCode::BadInput, "bad certificate"};
    try {
        c.subject_id = j.at("subject_id").get<std::string>();
        if (!hex_decode(j.at("subject_public").get<std::string>(), c.subject_public) ||
            !hex_decode(j.at("issuer_signature").get<std::string>(), c.issuer_signature))
            return Error{ErrorCode::BadInput, "bad certificate hex"};
    } catch (const json::exception&) {
        return Error{ErrorCode::BadInput, "bad certificate"};
    }
    return c;
}

json policy_to(const ContactPolicy& p) {
    return json::parse(policy_to_json(p));
}

}  // namespace

std::string endpoint_to_json(const EndpointDescriptor& ed) { return ed_to(ed).dump(); }
std::string cert_to_json(const crypto::Certificate& cert) { return cert_to(cert).dump(); }

Result<EndpointDescriptor> endpoint_from_json(const std::string& text) {
    auto j = json::parse(text, nullptr, false);
    if (j.is_discarded()) return Error{ErrorCode::BadInput, "bad endpoint json"};
    return ed_from(j);
}

Result<crypto::Certificate> cert_from_json(const std::string& text) {
    auto j = json::parse(text, nullptr, false);
    if (j.is_discarded()) return Error{ErrorCode::BadInput, "bad certificate json"};
    return cert_from(j);
}

std::string grant_to_json(const ContactGrant& g) {
    json j{{"owner_cert", cert_to(g.owner_cert)},
           {"agent_id", g.agent_id.str()},
           {"endpoint", ed_to(g.endpoint)},
           {"tls_cert", cert_to(g.tls_cert)},
           {"access_public", hex_encode(g.access_public)},
           {"otk", hex_encode(g.otk)},
           {"otk_signature", hex_encode(g.otk_signature)},
           {"agent_signature", hex_encode(g.agent_signature)}};
    return j.dump();
}

Result<ContactGrant> grant_from_json(const std::string& text) {
    auto j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        return Error{ErrorCode::BadInput, "bad grant json"};
    ContactGrant g;
    try {
        auto oc = cert_from(j.at("owner_cert"));
        if (!oc) return oc.error();
        g.owner_cert = *oc;
        auto aid = AgentId::parse(j.at("agent_id").get<std::string>());
        if (!aid) return aid.error();
        g.agent_id = *aid;
        auto ed = ed_from(j.at("endpoint"));
        if (!ed) return ed.error();
        g.endpoint = *ed;
        auto tc = cert_from(j.at("tls_cert"));
        if (!tc) return tc.error();
        g.tls_cert = *tc;
        if (!hex_decode(j.at("access_public").get<std::string>(), g.access_public) ||
            !hex_decode(j.at("otk").get<std::string>(), g.otk) ||
            !hex_decode(j.at("otk_signature").get<std::string>(), g.otk_signature) ||
            !hex_decode(j.at("agent_signature").get<std::string>(), g.agent_signature))
            return Error{ErrorCode::BadInput, "bad grant hex"};
    } catch (const json::exception&) {
        return Error{ErrorCode::BadInput, "bad grant json"};
    }
    return g;
}

std::string submission_to_json(const AgentSubmission& s) {
    json otks = json::array();
    for (const auto& o : s.otks) {
        otks.push_back({{"otk", hex_encode(o.otk)},
                        {"owner_signature", hex_encode(o.owner_signature)}});
    }
    json j{{"agent_id", s.agent_id.str()},
           {"endpoint", ed_to(s.endpoint)},
           {"policy", policy_to(s.policy)},
           {"tls_cert", cert_to(s.tls_cert)},
           {"access_public", hex_encode(s.access_public)},
           {"otks", otks},
           {"owner_signature", hex_encode(s.owner_signature)}};
    return j.dump();
}

Result<AgentSubmission> submission_from_json(const std::string& text) {
    auto j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        return Error{ErrorCode::BadInput, "bad submission json"};
    AgentSubmission s;
    try {
        auto aid = AgentId::parse(j.at("agent_id").get<std::string>());
        if (!aid) return aid.error();
        s.agent_id = *aid;
        auto ed = ed_from(j.at("endpoint"));
        if (!ed) return ed.error();
        s.endpoint = *ed;
        auto pol = policy_from_json(j.at("policy").dump());
        if (!pol) return pol.error();
        s.policy = *pol;
        auto tc = cert_from(j.at("tls_cert"));
        if (!tc) return tc.error();
        s.tls_cert = *tc;
        if (!hex_decode(j.at("access_public").get<std::string>(), s.access_public) ||
            !hex_decode(j.at("owner_signature").get<std::string>(), s.owner_signature))
            return Error{ErrorCode::BadInput, "bad submission hex"};
        for (const auto& jo : j.at("otks")) {
            SignedOtk o;
            if (!hex_decode(jo.at("otk").get<std::string>(), o.otk) ||
                !hex_decode(jo.at("owner_signature").get<std::string>(), o.owner_signature))
                return Error{ErrorCode::BadInput, "bad otk hex"};
            s.otks.push_back(o);
        }
    } catch (const json::exception&) {
        return Error{ErrorCode::BadInput, "bad submission json"};
    }
    return s;
}

std::string initiator_info_to_json(const InitiatorInfo& i) {
    json j{{"agent_id", i.agent_id.str()},
           {"tls_cert", cert_to(i.tls_cert)},
           {"endpoint", ed_to(i.endpoint)},
           {"access_public", hex_encode(i.access_public)},
           {"owner_signature", hex_encode(i.owner_signature)}};
    return j.dump();
}

Result<InitiatorInfo> initiator_info_from_json(const std::string& text) {
    auto j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        return Error{ErrorCode::BadInput, "bad initiator info json"};
    InitiatorInfo i;
    try {
        auto aid = AgentId::parse(j.at("agent_id").get<std::string>());
        if (!aid) return aid.error();
        i.agent_id = *aid;
        auto tc = cert_from(j.at("tls_cert"));
        if (!tc) return tc.error();
        i.tls_cert = *tc;
        auto ed = ed_from(j.at("endpoint"));
        if (!ed) return ed.error();
        i.endpoint = *ed;
        if (!hex_decode(j.at("access_public").get<std::string>(), i.access_public) ||
            !hex_decode(j.at("owner_signature").get<std::string>(), i.owner_signature))
            return Error{ErrorCode::BadInput, "bad initiator info hex"};
    } catch (const json::exception&) {
        return Error{ErrorCode::BadInput, "bad initiator info json"};
    }
    return i;
}

}  // namespace pact
