#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pact/errors.hpp"
#include "pact/guards.hpp"
#include "pact/token.hpp"

namespace pact::harness {

// One adversarial scenario run against an in-process Provider plus victim
// and adversary agents. `detail` carries the achieved request count for the
// bounded-abuse scenario and the rejection reason elsewhere.
struct AttackReport {
    std::string scenario;
    std::string detected_at_step;
    std::string expected_step;
    std::string detail;
    bool pass = false;
};

inline const std::vector<std::string>& attack_scenarios() {
    static const std::vector<std::string> ids = {"A1", "A2", "A3", "A4",
                                                 "A5", "A6", "A7", "A8"};
    return ids;
}

// Runs one scenario, self-contained. `toggles` defaults to all guards on;
// the mutation mode disables one to show the scenario actually depends on it.
AttackReport run_attack(const std::string& scenario, const GuardToggles& toggles = {},
                        std::uint64_t seed = 0);

std::string report_to_json(const AttackReport& report);

// Analytic cost model of provider-mediated contact: one resolve-and-handshake
// cycle every q_max requests.
struct OverheadModel {
    double rtt_ms = 50.0;
    double t_crypto_ms = 7.0;
    std::uint32_t q_max = 10;
    std::uint32_t m = 100;
};

struct OverheadResult {
    double total_ms = 0;
    double amortized_ms = 0;
    std::uint64_t cycles = 0;
};

Result<OverheadResult> protocol_overhead(const OverheadModel& model);

// Empirical counterpart: real handshakes through the full stack over a
// simulated network with the given injected round-trip time.
struct MeasuredOverhead {
    double measured_ms = 0;
    double predicted_ms = 0;  // protocol_overhead under the same parameters
    std::uint64_t provider_cycles = 0;
    std::uint64_t requests = 0;
};

Result<MeasuredOverhead> measured_overhead(std::uint32_t q_max, std::uint32_t m,
                                           double rtt_ms, std::uint64_t seed = 0);

// Supported concurrent-agent population: token issuance throughput (per
// minute) times token lifetime (in minutes).
double capacity(double throughput_per_minute, double lifetime_seconds);

// Local single-process issuance throughput, measured against a live
// registry, reported per minute. Never compared against published absolute
// numbers; hardware differs.
Result<double> measure_provider_throughput(std::uint32_t iterations);

}  // namespace pact::harness
