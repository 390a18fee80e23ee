#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pact/errors.hpp"

namespace pact {

// Agent identifier "user@domain:agent_name". Exactly one ':' separator,
// exactly one '@' in the user part.
struct AgentId {
    std::string user_id;
    std::string agent_name;

    std::string str() const { return user_id + ":" + agent_name; }
    bool operator==(const AgentId&) const = default;
    auto operator<=>(const AgentId&) const = default;

    static Result<AgentId> parse(const std::string& s);
};

// One contact-policy rule: an id pattern with '*' wildcards and an OTK
// budget. Budget -1 blocks matching initiators outright.
struct PolicyRule {
    std::string pattern;
    int budget = 0;

    bool operator==(const PolicyRule&) const = default;
};

struct ContactPolicy {
    std::vector<PolicyRule> rules;

    bool operator==(const ContactPolicy&) const = default;
};

// True if `pattern` matches the canonical form of `id`. '*' matches any run
// of characters on one side of the ':' separator and never crosses it.
bool pattern_matches(const std::string& pattern, const AgentId& id);

// Specificity order between two patterns (both assumed to match the same
// id). Primary key: more literal characters wins. Tie-break: fewer '*'
// tokens, then lexicographically smaller pattern. Returns true if a is more
// specific than b.
bool more_specific(const std::string& a, const std::string& b);

// The matching rule of highest specificity, or nullopt. Deterministic under
// any rule ordering.
std::optional<PolicyRule> match_rule(const ContactPolicy& policy, const AgentId& initiator);

// -1 when no rule matches (distinct from an exhausted counter); otherwise
// the matched rule's budget, which may itself be -1 (explicit block).
int otk_budget(const ContactPolicy& policy, const AgentId& initiator);

// Policy file format: JSON list of {"agents": pattern, "budget": n}.
std::string policy_to_json(const ContactPolicy& policy);
Result<ContactPolicy> policy_from_json(const std::string& json_text);

// Rejects empty patterns, budgets below -1, and duplicate patterns.
Result<void> validate_policy(const ContactPolicy& policy);

}  // namespace pact
