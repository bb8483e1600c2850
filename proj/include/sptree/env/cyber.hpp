#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sptree/mdp.hpp"

namespace sptree::env {

/// Simplified network-defense POMDP. LANs each hold one application server
/// and a set of workstations; the LAN servers form a complete graph and the
/// server of `gateway_lan` links to the data server. The attacker starts on
/// one workstation and spreads one hop at a time along shortest paths toward
/// the data server.
struct CyberParams {
    std::size_t n_lans = 4;
    std::size_t workstations_per_lan = 10;
    std::size_t gateway_lan = 0;
    double p_detect = 0.8;
    double p_spontaneous_alert = 0.05;
    double p_false_alert = 0.005;
    double p_attack_spread = 0.15;
    double breach_penalty = -100.0;
    std::size_t horizon = 50;
    double discount = 0.99;

    void validate() const;

    friend bool operator==(const CyberParams&, const CyberParams&) = default;
};

/// State layout: one compromise flag per node (LAN l's server at
/// l * (W + 1), its workstations after it, the data server last), then the
/// step counter, then whether the most recently cleaned node had been
/// compromised. Observations hold one alert flag per non-data-server node.
/// Actions: scan LAN l (l < n_lans), then scan-and-clean node j.
class CyberModel final : public GenerativeModel {
public:
    explicit CyberModel(CyberParams params);

    const CyberParams& params() const noexcept { return params_; }

    std::size_t node_count() const noexcept { return params_.n_lans * (params_.workstations_per_lan + 1) + 1; }
    std::size_t host_count() const noexcept { return node_count() - 1; }
    std::size_t data_server() const noexcept { return node_count() - 1; }
    std::size_t server_of(std::size_t lan) const noexcept { return lan * (params_.workstations_per_lan + 1); }
    std::size_t workstation(std::size_t lan, std::size_t w) const noexcept { return server_of(lan) + 1 + w; }
    std::size_t lan_of(std::size_t node) const noexcept { return node / (params_.workstations_per_lan + 1); }
    bool is_server(std::size_t node) const noexcept { return node % (params_.workstations_per_lan + 1) == 0; }
    /// Next node on the attacker's shortest path toward the data server.
    std::size_t next_hop(std::size_t node) const noexcept;
    /// Hops from a LAN's server to the data server.
    std::size_t lan_distance(std::size_t lan) const noexcept { return lan == params_.gateway_lan ? 1 : 2; }

    ActionId scan_action(std::size_t lan) const noexcept { return ActionId{lan}; }
    ActionId clean_action(std::size_t node) const noexcept { return ActionId{params_.n_lans + node}; }
    bool is_scan(ActionId a) const noexcept { return a.index < params_.n_lans; }

    std::size_t action_count() const override { return params_.n_lans + host_count(); }
    std::size_t state_dimension() const override { return node_count() + 2; }
    double discount() const override { return params_.discount; }
    std::optional<std::size_t> horizon() const override { return params_.horizon; }
    bool partially_observable() const override { return true; }
    StepResult step(const StateVector& state, ActionId action, Rng& rng) const override;
    bool is_terminal(const StateVector& state) const override;
    StateVector initial_state(Rng& rng) const override;
    Belief initial_belief() const override;
    double observation_likelihood(const StateVector& state, ActionId action, const StateVector& next_state,
                                  const Observation& observation) const override;
    std::string action_label(ActionId action) const override;
    std::string describe_particles(std::span<const Particle> particles) const override;

    std::string node_name(std::size_t node) const;
    bool compromised(const StateVector& state, std::size_t node) const { return state[node] > 0.5; }
    /// Whether `node` was scanned by `action`.
    bool scanned(ActionId action, std::size_t node) const noexcept;

private:
    /// Alert probability of a host given its compromise status and whether it was scanned.
    double alert_probability(bool compromised, bool was_scanned) const noexcept;

    CyberParams params_;
};

}  // namespace sptree::env
