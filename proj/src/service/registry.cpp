#include "sptree/service/registry.hpp"

#include <map>
#include <mutex>

#include "sptree/baselines/fitted_q.hpp"
#include "sptree/baselines/heuristics.hpp"
#include "sptree/baselines/value_iteration.hpp"
#include "sptree/env/config.hpp"

namespace sptree::service {

using nlohmann::json;

const std::vector<std::string>& environment_kinds() {
    static const std::vector<std::string> kinds{"grid", "vaccine", "cyber"};
    return kinds;
}

namespace {

/// Service-sized training run; sessions share one trained model per parameter set.
baselines::FittedQConfig service_fitted_q_config() {
    baselines::FittedQConfig c;
    c.iterations = 6000;
    c.warmup = 300;
    c.hidden = 32;
    c.replay_capacity = 6000;
    return c;
}

std::shared_ptr<const baselines::FittedQModel> cached_fitted_q(const env::SirdModel& model, const json& params,
                                                               std::uint64_t seed) {
    static std::mutex mutex;
    static std::map<std::string, std::shared_ptr<const baselines::FittedQModel>> cache;
    const std::string key = params.dump() + "#" + std::to_string(seed);
    std::lock_guard lock(mutex);
    auto it = cache.find(key);
    if (it == cache.end()) {
        auto trained = std::make_shared<const baselines::FittedQModel>(
            baselines::fitted_q_train(model, service_fitted_q_config(), seed));
        it = cache.emplace(key, std::move(trained)).first;
    }
    return it->second;
}

}  // namespace

Environment make_environment(const std::string& kind, const json& params, const json& options) {
    std::string policy_name;
    std::uint64_t policy_seed = 0;
    if (!options.is_object()) {
        throw env::ConfigError("options must be an object");
    }
    for (const auto& [key, value] : options.items()) {
        if (key == "policy") {
            policy_name = value.get<std::string>();
        } else if (key == "policy_seed") {
            policy_seed = value.get<std::uint64_t>();
        } else {
            throw env::ConfigError("unknown option '" + key + "'");
        }
    }

    Environment out;
    out.kind = kind;
    if (kind == "grid") {
        const auto p = env::grid_params_from_json(params);
        auto model = std::make_shared<const env::GridWorld>(p);
        auto table = std::make_shared<const baselines::ValueTable>(
            baselines::value_iteration(static_cast<const EnumerableMdp&>(*model), p.discount, 1e-10, 100000));
        out.params = env::to_json(p);
        out.policy = std::make_shared<const baselines::ValueTablePolicy>(table, model);
        out.model = std::move(model);
    } else if (kind == "vaccine") {
        const auto p = env::sird_params_from_json(params);
        auto model = std::make_shared<const env::SirdModel>(p);
        out.params = env::to_json(p);
        if (policy_name.empty() || policy_name == "fitted_q") {
            out.policy = std::make_shared<const baselines::FittedQPolicy>(cached_fitted_q(*model, out.params, policy_seed));
        } else if (policy_name == "lookahead") {
            out.policy = std::make_shared<const baselines::LookaheadVaccinePolicy>(model);
        } else {
            throw env::ConfigError("unknown vaccine policy '" + policy_name + "'");
        }
        out.model = std::move(model);
    } else if (kind == "cyber") {
        const auto p = env::cyber_params_from_json(params);
        auto model = std::make_shared<const env::CyberModel>(p);
        out.params = env::to_json(p);
        out.policy = std::make_shared<const baselines::ScriptedCyberPolicy>(model);
        out.model = std::move(model);
    } else {
        throw env::ConfigError("unknown environment '" + kind + "'");
    }
    if (!policy_name.empty() && kind != "vaccine") {
        throw env::ConfigError("environment '" + kind + "' has a single baseline policy");
    }
    return out;
}

}  // namespace sptree::service
