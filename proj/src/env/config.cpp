#include "sptree/env/config.hpp"

#include <fstream>
#include <set>

namespace sptree::env {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const char* what) {
    if (!j.is_object()) {
        throw ConfigError(std::string(what) + " parameters must be an object");
    }
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) {
            throw ConfigError(std::string("unknown ") + what + " parameter '" + key + "'");
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) {
        return;
    }
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

void read_cells(const json& j, const char* key, std::vector<Cell>& out) {
    if (!j.contains(key)) {
        return;
    }
    out.clear();
    for (const auto& c : j.at(key)) {
        if (!c.is_array() || c.size() != 2) {
            throw ConfigError(std::string("'") + key + "' entries must be [x, y] pairs");
        }
        out.push_back(Cell{c[0].get<int>(), c[1].get<int>()});
    }
}

json cells_json(const std::vector<Cell>& cells) {
    json out = json::array();
    for (Cell c : cells) {
        out.push_back({c.x, c.y});
    }
    return out;
}

template <typename Params>
Params validated(Params p) {
    try {
        p.validate();
    } catch (const std::logic_error& e) {
        throw ConfigError(e.what());
    }
    return p;
}

}  // namespace

GridWorldParams grid_params_from_json(const json& j) {
    reject_unknown(j,
                   {"width", "height", "n_actions", "p_success", "start", "goals", "traps", "step_cost", "goal_reward",
                    "trap_penalty", "max_steps", "discount"},
                   "grid");
    GridWorldParams p;
    read(j, "width", p.width);
    read(j, "height", p.height);
    read(j, "n_actions", p.n_actions);
    read(j, "p_success", p.p_success);
    if (j.contains("start")) {
        const auto& c = j.at("start");
        if (!c.is_array() || c.size() != 2) {
            throw ConfigError("'start' must be an [x, y] pair");
        }
        p.start = Cell{c[0].get<int>(), c[1].get<int>()};
    }
    read_cells(j, "goals", p.goals);
    read_cells(j, "traps", p.traps);
    read(j, "step_cost", p.step_cost);
    read(j, "goal_reward", p.goal_reward);
    read(j, "trap_penalty", p.trap_penalty);
    read(j, "max_steps", p.max_steps);
    read(j, "discount", p.discount);
    return validated(std::move(p));
}

json to_json(const GridWorldParams& p) {
    return json{{"width", p.width},
                {"height", p.height},
                {"n_actions", p.n_actions},
                {"p_success", p.p_success},
                {"start", {p.start.x, p.start.y}},
                {"goals", cells_json(p.goals)},
                {"traps", cells_json(p.traps)},
                {"step_cost", p.step_cost},
                {"goal_reward", p.goal_reward},
                {"trap_penalty", p.trap_penalty},
                {"max_steps", p.max_steps},
                {"discount", p.discount}};
}

SirdParams sird_params_from_json(const json& j) {
    reject_unknown(j,
                   {"n_cities", "beta", "gamma_rec", "mu", "alpha_vax", "weight_decay", "noise_std", "reward_infected",
                    "reward_dead", "programs_per_episode", "max_decisions", "initial_max_infected", "hotspot_infected",
                    "quiescence_threshold", "max_runout_steps", "discount", "city_names"},
                   "vaccine");
    SirdParams p;
    read(j, "n_cities", p.n_cities);
    read(j, "beta", p.beta);
    read(j, "gamma_rec", p.gamma_rec);
    read(j, "mu", p.mu);
    read(j, "alpha_vax", p.alpha_vax);
    read(j, "weight_decay", p.weight_decay);
    read(j, "noise_std", p.noise_std);
    read(j, "reward_infected", p.reward_infected);
    read(j, "reward_dead", p.reward_dead);
    read(j, "programs_per_episode", p.programs_per_episode);
    read(j, "max_decisions", p.max_decisions);
    read(j, "initial_max_infected", p.initial_max_infected);
    read(j, "hotspot_infected", p.hotspot_infected);
    read(j, "quiescence_threshold", p.quiescence_threshold);
    read(j, "max_runout_steps", p.max_runout_steps);
    read(j, "discount", p.discount);
    read(j, "city_names", p.city_names);
    return validated(std::move(p));
}

json to_json(const SirdParams& p) {
    return json{{"n_cities", p.n_cities},
                {"beta", p.beta},
                {"gamma_rec", p.gamma_rec},
                {"mu", p.mu},
                {"alpha_vax", p.alpha_vax},
                {"weight_decay", p.weight_decay},
                {"noise_std", p.noise_std},
                {"reward_infected", p.reward_infected},
                {"reward_dead", p.reward_dead},
                {"programs_per_episode", p.programs_per_episode},
                {"max_decisions", p.max_decisions},
                {"initial_max_infected", p.initial_max_infected},
                {"hotspot_infected", p.hotspot_infected},
                {"quiescence_threshold", p.quiescence_threshold},
                {"max_runout_steps", p.max_runout_steps},
                {"discount", p.discount},
                {"city_names", p.city_names}};
}

CyberParams cyber_params_from_json(const json& j) {
    reject_unknown(j,
                   {"n_lans", "workstations_per_lan", "gateway_lan", "p_detect", "p_spontaneous_alert",
                    "p_false_alert", "p_attack_spread", "breach_penalty", "horizon", "discount"},
                   "cyber");
    CyberParams p;
    read(j, "n_lans", p.n_lans);
    read(j, "workstations_per_lan", p.workstations_per_lan);
    read(j, "gateway_lan", p.gateway_lan);
    read(j, "p_detect", p.p_detect);
    read(j, "p_spontaneous_alert", p.p_spontaneous_alert);
    read(j, "p_false_alert", p.p_false_alert);
    read(j, "p_attack_spread", p.p_attack_spread);
    read(j, "breach_penalty", p.breach_penalty);
    read(j, "horizon", p.horizon);
    read(j, "discount", p.discount);
    return validated(std::move(p));
}

json to_json(const CyberParams& p) {
    return json{{"n_lans", p.n_lans},
                {"workstations_per_lan", p.workstations_per_lan},
                {"gateway_lan", p.gateway_lan},
                {"p_detect", p.p_detect},
                {"p_spontaneous_alert", p.p_spontaneous_alert},
                {"p_false_alert", p.p_false_alert},
                {"p_attack_spread", p.p_attack_spread},
                {"breach_penalty", p.breach_penalty},
                {"horizon", p.horizon},
                {"discount", p.discount}};
}

json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace sptree::env
