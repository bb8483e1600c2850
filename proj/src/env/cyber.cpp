#include "sptree/env/cyber.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace sptree::env {

void CyberParams::validate() const {
    if (n_lans == 0 || workstations_per_lan == 0) {
        throw ContractViolation("network needs at least one LAN and one workstation per LAN");
    }
    if (gateway_lan >= n_lans) {
        throw ContractViolation("gateway_lan out of range");
    }
    if (!(p_detect > 0.0 && p_detect <= 1.0)) {
        throw ContractViolation("p_detect must be in (0, 1]");
    }
    for (double p : {p_spontaneous_alert, p_false_alert, p_attack_spread}) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ContractViolation("cyber probabilities must be in [0, 1]");
        }
    }
    if (horizon == 0) {
        throw ContractViolation("horizon must be positive");
    }
    if (!(discount > 0.0 && discount <= 1.0)) {
        throw ContractViolation("discount must be in (0, 1]");
    }
}

CyberModel::CyberModel(CyberParams params) : params_(std::move(params)) { params_.validate(); }

std::size_t CyberModel::next_hop(std::size_t node) const noexcept {
    if (node == data_server()) {
        return node;
    }
    const std::size_t lan = lan_of(node);
    if (!is_server(node)) {
        return server_of(lan);
    }
    return lan == params_.gateway_lan ? data_server() : server_of(params_.gateway_lan);
}

bool CyberModel::scanned(ActionId action, std::size_t node) const noexcept {
    if (node == data_server()) {
        return false;
    }
    if (is_scan(action)) {
        return lan_of(node) == action.index;
    }
    return action.index - params_.n_lans == node;
}

double CyberModel::alert_probability(bool is_compromised, bool was_scanned) const noexcept {
    if (!is_compromised) {
        return params_.p_false_alert;
    }
    const double detect = was_scanned ? params_.p_detect : 0.0;
    return 1.0 - (1.0 - detect) * (1.0 - params_.p_spontaneous_alert);
}

StepResult CyberModel::step(const StateVector& state, ActionId action, Rng& rng) const {
    check_state(state);
    check_action(action);
    if (is_terminal(state)) {
        throw ContractViolation("cannot step a breached or expired network");
    }
    const std::size_t nodes = node_count();
    StepResult r;
    r.next_state = state;
    auto& s = r.next_state;

    // Attacker phase: every compromised host tries its next hop. One draw per
    // host regardless of status keeps random streams aligned across states.
    for (std::size_t k = 0; k < host_count(); ++k) {
        const bool spread = rng.bernoulli(params_.p_attack_spread);
        if (compromised(state, k) && spread) {
            s[next_hop(k)] = 1.0;
        }
    }

    // Defender phase. Alerts reflect status before any cleaning.
    std::vector<bool> status(host_count());
    for (std::size_t k = 0; k < host_count(); ++k) {
        status[k] = compromised(s, k);
    }
    s[nodes + 1] = 0.0;
    if (!is_scan(action)) {
        const std::size_t target = action.index - params_.n_lans;
        s[nodes + 1] = status[target] ? 1.0 : 0.0;
        s[target] = 0.0;
    }

    Observation obs(host_count(), 0.0);
    for (std::size_t k = 0; k < host_count(); ++k) {
        const bool alert = rng.bernoulli(alert_probability(status[k], scanned(action, k)));
        obs[k] = alert ? 1.0 : 0.0;
    }
    r.observation = std::move(obs);

    s[nodes] += 1.0;
    if (compromised(s, data_server())) {
        r.reward = params_.breach_penalty;
        r.done = true;
    } else {
        r.done = static_cast<std::size_t>(s[nodes]) >= params_.horizon;
    }
    return r;
}

double CyberModel::observation_likelihood(const StateVector&, ActionId action, const StateVector& next_state,
                                          const Observation& observation) const {
    if (observation.size() != host_count()) {
        throw ContractViolation("cyber observation has the wrong length");
    }
    const std::size_t nodes = node_count();
    double likelihood = 1.0;
    for (std::size_t k = 0; k < host_count(); ++k) {
        bool status = compromised(next_state, k);
        if (!is_scan(action) && action.index - params_.n_lans == k) {
            status = next_state[nodes + 1] > 0.5;
        }
        const double p = alert_probability(status, scanned(action, k));
        likelihood *= observation[k] > 0.5 ? p : 1.0 - p;
        if (likelihood == 0.0) {
            break;
        }
    }
    return likelihood;
}

bool CyberModel::is_terminal(const StateVector& state) const {
    return compromised(state, data_server()) || static_cast<std::size_t>(state[node_count()]) >= params_.horizon;
}

Belief CyberModel::initial_belief() const {
    std::vector<StateVector> hypotheses;
    for (std::size_t lan = 0; lan < params_.n_lans; ++lan) {
        for (std::size_t w = 0; w < params_.workstations_per_lan; ++w) {
            StateVector s(state_dimension(), 0.0);
            s[workstation(lan, w)] = 1.0;
            hypotheses.push_back(std::move(s));
        }
    }
    return Belief::uniform(std::move(hypotheses));
}

StateVector CyberModel::initial_state(Rng& rng) const {
    StateVector s(state_dimension(), 0.0);
    const auto lan = static_cast<std::size_t>(rng.below(params_.n_lans));
    const auto w = static_cast<std::size_t>(rng.below(params_.workstations_per_lan));
    s[workstation(lan, w)] = 1.0;
    return s;
}

std::string CyberModel::node_name(std::size_t node) const {
    if (node == data_server()) {
        return "Data";
    }
    const std::string lan = "L" + std::to_string(lan_of(node) + 1);
    if (is_server(node)) {
        return lan + "-S";
    }
    return lan + "-W" + std::to_string(node - server_of(lan_of(node)));
}

std::string CyberModel::action_label(ActionId action) const {
    if (is_scan(action)) {
        return "Scan LAN " + std::to_string(action.index + 1);
    }
    return "Clean " + node_name(action.index - params_.n_lans);
}

std::string CyberModel::describe_particles(std::span<const Particle> particles) const {
    std::map<Observation, std::size_t> counts;
    for (const auto& p : particles) {
        if (p.observation) {
            ++counts[*p.observation];
        }
    }
    if (counts.empty()) {
        return "no observation";
    }
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it) {
        if (it->second > best->second) {
            best = it;
        }
    }
    std::ostringstream out;
    bool any = false;
    for (std::size_t k = 0; k < best->first.size(); ++k) {
        if (best->first[k] > 0.5) {
            out << (any ? ", " : "alerts: ") << node_name(k);
            any = true;
        }
    }
    if (!any) {
        out << "no alerts";
    }
    return out.str();
}

}  // namespace sptree::env
