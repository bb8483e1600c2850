#pragma once

// Environment kinds the service can host, each paired with its baseline policy.

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "sptree/mdp.hpp"

namespace sptree::service {

struct Environment {
    std::string kind;
    nlohmann::json params;  // effective parameters, defaults filled in
    std::shared_ptr<const GenerativeModel> model;
    std::shared_ptr<const BaselinePolicy> policy;
};

/// Known kinds: "grid" (value iteration), "vaccine" (fitted Q, or "policy":
/// "lookahead"), "cyber" (scripted defender).
const std::vector<std::string>& environment_kinds();

/// `options` may carry "policy" and "policy_seed"; anything else in it is rejected.
/// Throws env::ConfigError for unknown kinds or parameters.
Environment make_environment(const std::string& kind, const nlohmann::json& params,
                             const nlohmann::json& options = nlohmann::json::object());

}  // namespace sptree::service
