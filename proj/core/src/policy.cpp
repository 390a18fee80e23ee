#include "pact/policy.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

namespace pact {

Result<AgentId> AgentId::parse(const std::string& s) {
    auto colon = s.find(':');
    if (colon == std::string::npos || s.find(':', colon + 1) != std::string::npos) {
        return Error{ErrorCode::BadInput, "agent id needs exactly one ':'"};
    }
    AgentId id;
    id.user_id = s.substr(0, colon);
    id.agent_name = s.substr(colon + 1);
    if (id.user_id.empty() || id.agent_name.empty()) {
        return Error{ErrorCode::BadInput, "empty agent id component"};
    }
    auto at = id.user_id.find('@');
    if (at == std::string::npos || id.user_id.find('@', at + 1) != std::string::npos) {
        return Error{ErrorCode::BadInput, "user id needs exactly one '@'"};
    }
    return id;
}

namespace {

// Glob match with '*' as "any run of characters"; both inputs are one side
// of the ':' separator, so '*' cannot cross it.
bool glob_match(std::string_view pattern, std::string_view text) {
    std::size_t p = 0, t = 0;
    std::size_t star = std::string_view::npos, backtrack = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            backtrack = t;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            t = ++backtrack;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

std::size_t literal_chars(const std::string& pattern) {
    return pattern.size() - std::count(pattern.begin(), pattern.end(), '*');
}

std::size_t wildcard_tokens(const std::string& pattern) {
    return std::count(pattern.begin(), pattern.end(), '*');
}

}  // namespace

bool pattern_matches(const std::string& pattern, const AgentId& id) {
    auto colon = pattern.find(':');
    if (colon == std::string::npos) return false;
    return glob_match(std::string_view(pattern).substr(0, colon), id.user_id) &&
           glob_match(std::string_view(pattern).substr(colon + 1), id.agent_name);
}

bool more_specific(const std::string& a, const std::string& b) {
    auto la = literal_chars(a), lb = literal_chars(b);
    if (la != lb) return la > lb;
    auto wa = wildcard_tokens(a), wb = wildcard_tokens(b);
    if (wa != wb) return wa < wb;
    return a < b;
}

std::optional<PolicyRule> match_rule(const ContactPolicy& policy, const AgentId& initiator) {
    const PolicyRule* best = nullptr;
    for (const auto& rule : policy.rules) {
        if (!pattern_matches(rule.pattern, initiator)) continue;
        if (!best || more_specific(rule.pattern, best->pattern)) best = &rule;
    }
    if (!best) return std::nullopt;
    return *best;
}

int otk_budget(const ContactPolicy& policy, const AgentId& initiator) {
    auto rule = match_rule(policy, initiator);
    return rule ? rule->budget : -1;
}

std::string policy_to_json(const ContactPolicy& policy) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& rule : policy.rules) {
        arr.push_back({{"agents", rule.pattern}, {"budget", rule.budget}});
    }
    return arr.dump(2);
}

Result<ContactPolicy> policy_from_json(const std::string& json_text) {
    auto parsed = nlohmann::json::parse(json_text, nullptr, false, /*ignore_comments=*/true);
    if (parsed.is_discarded() || !parsed.is_array()) {
        return Error{ErrorCode::BadInput, "policy file must be a JSON array"};
    }
    ContactPolicy policy;
    for (const auto& item : parsed) {
        if (!item.is_object() || !item.contains("agents") || !item.contains("budget") ||
            !item["agents"].is_string() || !item["budget"].is_number_integer()) {
            return Error{ErrorCode::BadInput, "policy rule needs {agents, budget}"};
        }
        policy.rules.push_back({item["agents"].get<std::string>(), item["budget"].get<int>()});
    }
    if (auto v = validate_policy(policy); !v) return v.error();
    return policy;
}

Result<void> validate_policy(const ContactPolicy& policy) {
    std::set<std::string> seen;
    for (const auto& rule : policy.rules) {
        if (rule.pattern.empty()) {
            return Error{ErrorCode::BadInput, "empty pattern"};
        }
        if (rule.budget < -1) {
            return Error{ErrorCode::BadInput, "budget below -1: " + rule.pattern};
        }
        if (!seen.insert(rule.pattern).second) {
            return Error{ErrorCode::BadInput, "duplicate pattern: " + rule.pattern};
        }
    }
    return {};
}

}  // namespace pact
