#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "pact/messages.hpp"

using namespace pact;

namespace {

crypto::Signature random_sig() {
    crypto::Signature s;
    auto b = crypto::random_bytes(s.size());
    std::copy(b.begin(), b.end(), s.begin());
    return s;
}

AgentSubmission sample_submission() {
    AgentSubmission sub;
    sub.agent_id = *AgentId::parse("alice@company.com:assistant");
    sub.endpoint = {"laptop", "192.168.1.10", 7801};
    sub.policy = ContactPolicy{{{"*@company.com:*", 10}}};
    auto issuer = crypto::keygen_sign();
    auto tls = crypto::keygen_sign();
    sub.tls_cert = crypto::make_certificate(issuer.secret_key, sub.agent_id.str(),
                                            tls.public_key);
    sub.access_public = crypto::keygen_exchange().public_key;
    for (int i = 0; i < 3; ++i) {
        sub.otks.push_back({crypto::keygen_exchange().public_key, random_sig()});
    }
    sub.owner_signature = random_sig();
    return sub;
}

}  // namespace

TEST_CASE("tuple encoding separates field boundaries") {
    auto a = Encoder{}.field("ab").field("c").take();
    auto b = Encoder{}.field("a").field("bc").take();
    CHECK(a != b);
    CHECK(Encoder{}.field_u64(1).take() != Encoder{}.field_u64(256).take());
}

TEST_CASE("hex roundtrips and rejects malformed input") {
    Bytes data = crypto::random_bytes(33);
    Bytes back;
    REQUIRE(hex_decode(hex_encode(data), back));
    CHECK(back == data);
    CHECK_FALSE(hex_decode("abc", back));    // odd length
    CHECK_FALSE(hex_decode("zz", back));     // non-hex
    crypto::PublicKey pk;
    CHECK_FALSE(hex_decode("aabb", pk));     // wrong size for fixed array
}

TEST_CASE("endpoint json roundtrip") {
    EndpointDescriptor ed{"phone", "10.1.2.3", 8080};
    auto back = endpoint_from_json(endpoint_to_json(ed));
    REQUIRE(back.ok());
    CHECK(*back == ed);
    CHECK(ed.key() == "10.1.2.3:8080");
    CHECK_FALSE(endpoint_from_json("{}").ok());
    CHECK_FALSE(endpoint_from_json("not json").ok());
}

TEST_CASE("certificate json roundtrip") {
    auto issuer = crypto::keygen_sign();
    auto subject = crypto::keygen_sign();
    auto cert = crypto::make_certificate(issuer.secret_key, "u@d.com", subject.public_key);
    auto back = cert_from_json(cert_to_json(cert));
    REQUIRE(back.ok());
    CHECK(*back == cert);
}

TEST_CASE("submission json roundtrip") {
    auto sub = sample_submission();
    auto back = submission_from_json(submission_to_json(sub));
    REQUIRE(back.ok());
    CHECK(back->agent_id == sub.agent_id);
    CHECK(back->endpoint == sub.endpoint);
    CHECK(back->policy == sub.policy);
    CHECK(back->tls_cert == sub.tls_cert);
    CHECK(back->access_public == sub.access_public);
    CHECK(back->otks == sub.otks);
    CHECK(back->owner_signature == sub.owner_signature);
}

TEST_CASE("grant json roundtrip") {
    auto sub = sample_submission();
    ContactGrant grant;
    auto issuer = crypto::keygen_sign();
    grant.owner_cert = crypto::make_certificate(issuer.secret_key, "alice@company.com",
                                                crypto::keygen_sign().public_key);
    grant.agent_id = sub.agent_id;
    grant.endpoint = sub.endpoint;
    grant.tls_cert = sub.tls_cert;
    grant.access_public = sub.access_public;
    grant.otk = sub.otks[0].otk;
    grant.otk_signature = sub.otks[0].owner_signature;
    grant.agent_signature = sub.owner_signature;
    auto back = grant_from_json(grant_to_json(grant));
    REQUIRE(back.ok());
    CHECK(back->owner_cert == grant.owner_cert);
    CHECK(back->agent_id == grant.agent_id);
    CHECK(back->otk == grant.otk);
    CHECK(back->agent_signature == grant.agent_signature);
}

TEST_CASE("initiator info json roundtrip") {
    auto sub = sample_submission();
    InitiatorInfo info{sub.agent_id, sub.tls_cert, sub.endpoint, sub.access_public,
                       sub.owner_signature};
    auto back = initiator_info_from_json(initiator_info_to_json(info));
    REQUIRE(back.ok());
    CHECK(back->agent_id == info.agent_id);
    CHECK(back->tls_cert == info.tls_cert);
    CHECK(back->endpoint == info.endpoint);
    CHECK(back->access_public == info.access_public);
    CHECK(back->owner_signature == info.owner_signature);
}

TEST_CASE("signed byte strings change with every field") {
    auto sub = sample_submission();
    auto provider = crypto::keygen_sign();
    auto base = agent_binding_tbs(sub.agent_id, sub.endpoint, sub.tls_cert.subject_public,
                                  sub.access_public, provider.public_key);

    auto other_endpoint = sub.endpoint;
    other_endpoint.port += 1;
    CHECK(agent_binding_tbs(sub.agent_id, other_endpoint, sub.tls_cert.subject_public,
                            sub.access_public, provider.public_key) != base);

    auto other_pac = crypto::keygen_exchange().public_key;
    CHECK(agent_binding_tbs(sub.agent_id, sub.endpoint, sub.tls_cert.subject_public,
                            other_pac, provider.public_key) != base);

    auto other_provider = crypto::keygen_sign().public_key;
    CHECK(agent_binding_tbs(sub.agent_id, sub.endpoint, sub.tls_cert.subject_public,
                            sub.access_public, other_provider) != base);

    // OTK binding and provider attestation are domain-separated from the
    // agent binding even over overlapping inputs.
    CHECK(otk_binding_tbs(sub.agent_id, sub.access_public) != base);
    CHECK(provider_attestation_tbs(sub.agent_id, sub.tls_cert, sub.endpoint,
                                   sub.access_public, sub.owner_signature) != base);
}
