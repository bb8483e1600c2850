#pragma once

// Local policy trees: particle rollouts under a baseline policy, greedy
// action clustering, and per-node statistics.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sptree/mdp.hpp"

namespace sptree {

/// How per-particle distances are aggregated into the clustering error.
enum class DeltaAggregation { Mean, Sum };

struct BuildConfig {
    std::size_t n_particles = 1000;
    std::size_t n_min = 250;
    std::size_t d_max = 10;
    double delta_star = 0.01;
    std::size_t c_max = 4;
    std::uint64_t seed = 0;
    DeltaAggregation delta_mode = DeltaAggregation::Mean;

    void validate() const;

    friend bool operator==(const BuildConfig&, const BuildConfig&) = default;
};

struct ActionNode {
    std::vector<Particle> particles;
    ActionId action;
    std::vector<ActionNode> children;

    std::size_t id = 0;  // pre-order index, assigned by annotate_statistics
    std::size_t depth = 0;
    double reach_probability = 0.0;
    double value_estimate = 0.0;
    double terminal_fraction = 0.0;
    std::size_t terminated = 0;        // particles that reached a terminal state when this node expanded
    double terminal_reward_sum = 0.0;  // their final rewards
    bool expanded = false;
    bool on_likely_path = false;
    std::vector<double> scores;  // baseline scores at the initial query; root only

    bool is_leaf() const noexcept { return children.empty(); }
    const ActionNode* child_with_action(ActionId a) const noexcept;
};

struct BuildStats {
    std::size_t particles_stepped = 0;
    std::size_t node_count = 0;
    double wall_time_ms = 0.0;
};

struct PolicyTree {
    ActionNode root;
    BuildConfig config;
    Query initial;
    std::size_t n_initial = 0;
    BuildStats stats;

    /// All nodes in pre-order (id order).
    std::vector<const ActionNode*> nodes() const;
    std::vector<const ActionNode*> leaves() const;
    /// Ids along the most likely root-to-leaf path.
    std::vector<std::size_t> most_likely_path() const;
    /// Unweighted mean depth over leaf nodes.
    double mean_leaf_depth() const;
    const ActionNode* find(std::size_t id) const;
};

/// Sub-optimality of `action` given baseline scores: |Q(a) - max Q| for
/// action values, max pi - pi(a) for probabilities.
double distance(std::span<const double> scores, ActionId action, ScoreKind kind);
double distance(const BaselinePolicy& policy, const Particle& particle, ActionId action);

/// Distinct greedy actions ranked by descending frequency, ties by ascending id.
std::vector<ActionId> rank_actions(std::span<const ActionId> greedy);
std::vector<ActionId> unique_actions(std::span<const Particle> particles, const BaselinePolicy& policy);

struct ClusterResult {
    std::vector<ActionNode> nodes;
    double delta = 0.0;
};

/// Seeds one node per top-k greedy action, then moves every unmatched
/// particle to the existing node of least distance.
ClusterResult greedy_cluster(std::vector<Particle> particles, std::size_t k, const BaselinePolicy& policy,
                             DeltaAggregation mode = DeltaAggregation::Mean);

/// Smallest k whose greedy clustering error is within delta_star, stopping
/// once c_max clusters are formed.
std::vector<ActionNode> cluster(std::vector<Particle> particles, const BaselinePolicy& policy,
                                const BuildConfig& config);

/// Expands `node` one step and recurses into the resulting clusters.
ActionNode rollout(ActionNode node, const GenerativeModel& model, const BaselinePolicy& policy, std::size_t depth,
                   const BuildConfig& config);

/// Builds an annotated tree rooted at the policy's greedy action for `initial`.
PolicyTree build_tree(const GenerativeModel& model, const BaselinePolicy& policy, const Query& initial,
                      const BuildConfig& config);

/// Assigns ids, reach probabilities, value estimates and the most likely path.
PolicyTree annotate_statistics(PolicyTree tree, const BaselinePolicy& policy);

enum class SummaryKind { Mean, Mode, ModalObservation };

struct StateSummary {
    SummaryKind kind = SummaryKind::Mean;
    std::vector<double> values;
    std::size_t support = 0;  // particles matching the mode; all particles for the mean

    friend bool operator==(const StateSummary&, const StateSummary&) = default;
};

StateSummary summarize_node_states(const ActionNode& node, SummaryKind kind);

}  // namespace sptree
