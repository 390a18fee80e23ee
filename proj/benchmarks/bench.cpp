#include <benchmark/benchmark.h>

#include "pact/agent.hpp"
#include "pact/provider.hpp"
#include "pact/registry.hpp"
#include "pact/token.hpp"

using namespace pact;

namespace {

crypto::SharedKey fixed_key() {
    crypto::SharedKey k;
    auto b = crypto::random_bytes(32);
    std::copy(b.begin(), b.end(), k.key.begin());
    return k;
}

void bm_keygen_sign(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(crypto::keygen_sign());
}
BENCHMARK(bm_keygen_sign);

void bm_keygen_exchange(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(crypto::keygen_exchange());
}
BENCHMARK(bm_keygen_exchange);

void bm_sign(benchmark::State& state) {
    auto keys = crypto::keygen_sign();
    Bytes msg = crypto::random_bytes(256);
    for (auto _ : state) benchmark::DoNotOptimize(crypto::sign(keys.secret_key, msg));
}
BENCHMARK(bm_sign);

void bm_verify(benchmark::State& state) {
    auto keys = crypto::keygen_sign();
    Bytes msg = crypto::random_bytes(256);
    auto sig = crypto::sign(keys.secret_key, msg);
    for (auto _ : state) benchmark::DoNotOptimize(crypto::verify(keys.public_key, msg, sig));
}
BENCHMARK(bm_verify);

void bm_dh_and_kdf(benchmark::State& state) {
    auto a = crypto::keygen_exchange();
    auto b = crypto::keygen_exchange();
    for (auto _ : state) {
        auto shared = crypto::dh(a.secret_key, b.public_key);
        benchmark::DoNotOptimize(crypto::kdf(*shared));
    }
}
BENCHMARK(bm_dh_and_kdf);

void bm_seal_open(benchmark::State& state) {
    auto key = fixed_key();
    Bytes msg = crypto::random_bytes(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto sealed = crypto::seal(key, msg);
        benchmark::DoNotOptimize(crypto::open(key, sealed));
    }
    state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_seal_open)->Arg(64)->Arg(1024)->Arg(16384);

void bm_token_issue_validate(benchmark::State& state) {
    TokenLedger ledger;
    auto key = fixed_key();
    auto pac = crypto::keygen_exchange().public_key;
    for (auto _ : state) {
        auto token = ledger.issue(key, TokenParams{600, 10}, pac, 1000);
        benchmark::DoNotOptimize(ledger.validate(token, pac, 1000));
        ledger.release(token);
    }
}
BENCHMARK(bm_token_issue_validate);

// Full resolve path against a live in-process registry. The pool is
// replenished when it runs dry so the loop measures steady-state cost.
void bm_resolve_contact(benchmark::State& state) {
    CertificateAuthority ca;
    auto provider_keys = crypto::keygen_sign();
    Registry registry(provider_keys, ca.public_key(), nullptr, nullptr,
                      RegistryConfig{false, {}});
    auto owner = crypto::keygen_sign();
    const std::string user = "owner@example.com";
    registry.register_user(user, "pw", ca.issue(user, owner.public_key));
    AgentId receiver{user, "assistant"};
    auto tls = crypto::keygen_sign();
    const std::size_t pool = 4096;
    auto material = prepare_registration(
        owner.secret_key, receiver, EndpointDescriptor{"bench", "10.0.0.1", 9100},
        ContactPolicy{{{"*@example.com:*", 1 << 30}}}, tls,
        ca.issue(receiver.str(), tls.public_key), crypto::keygen_exchange(),
        registry.provider_public(), pool);
    registry.register_agent(user, "pw", material.submission);
    AgentId initiator{"caller@example.com", "client"};

    for (auto _ : state) {
        if (registry.unconsumed_otk_count(receiver) == 0) {
            state.PauseTiming();
            auto batch = make_signed_otks(owner.secret_key, receiver, pool);
            registry.refresh_otks(user, "pw", receiver, batch.signed_otks);
            state.ResumeTiming();
        }
        benchmark::DoNotOptimize(registry.resolve_contact(initiator, receiver));
    }
}
BENCHMARK(bm_resolve_contact);

}  // namespace

BENCHMARK_MAIN();
