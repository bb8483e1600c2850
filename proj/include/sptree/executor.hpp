#pragma once

// Runs a policy tree as a controller: the root action first, then the
// baseline's best action among the current node's children, with a hand-off
// (rebuild, baseline, or stop) once a leaf has been executed.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sptree/mdp.hpp"
#include "sptree/tree.hpp"

namespace sptree {

/// Thrown by Controller::step when no further action may be taken.
class EpisodeFinished : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// What happens after a leaf's action has been taken, when rebuilding is off.
enum class LeafFallback {
    Baseline,  // unconstrained baseline actions for the rest of the episode
    None       // the episode stops at the leaf
};

struct ControllerConfig {
    bool rebuild_at_leaf = false;
    LeafFallback fallback = LeafFallback::Baseline;
    std::size_t max_steps = 1000;

    void validate() const;
};

struct TraceEntry {
    std::size_t step = 0;
    std::string state_summary;  // live state (or last observation) before the action
    ActionId action;
    double reward = 0.0;
    std::optional<std::size_t> node_id;  // tree node executed, if the action came from a tree
    std::size_t tree_index = 0;          // 0 for the first tree, k after k rebuilds
};

struct ExecutionState {
    std::shared_ptr<const PolicyTree> tree;
    /// Last node whose action was executed; null before the tree's first step
    /// and once the episode has left the tree.
    const ActionNode* current_node = nullptr;
    bool in_tree = true;

    StateVector true_state;  // hidden state for POMDPs
    Query live;              // what the controller knows: the state, or its belief
    std::optional<Observation> last_observation;

    std::size_t step_index = 0;
    double accumulated_return = 0.0;
    double discounted_return = 0.0;
    double discount_factor = 1.0;
    bool done = false;           // environment reached a terminal state
    bool halted = false;         // stopped at a leaf (LeafFallback::None) or at max_steps
    std::size_t rebuilds = 0;
    std::size_t belief_degeneracies = 0;
    std::vector<std::size_t> exit_depths;  // per tree: depth of the last tree node executed
    std::vector<double> tree_leaf_depths;  // per tree: unweighted mean leaf depth
    std::vector<TraceEntry> trace;

    bool finished() const noexcept { return done || halted; }
};

/// Drives one episode. The model and policy must outlive the controller.
class Controller {
public:
    Controller(const GenerativeModel& model, const BaselinePolicy& policy, ControllerConfig config,
               BuildConfig build, std::uint64_t episode_seed);

    /// Builds the first tree at the model's initial query for the episode seed.
    ExecutionState start() const;
    /// Starts from an existing tree whose initial query matches `live`.
    ExecutionState start(std::shared_ptr<const PolicyTree> tree, StateVector true_state) const;

    /// Next action: root at a tree's first step, constrained argmax over
    /// children afterwards, the baseline once outside the tree. Empty when a
    /// leaf has been executed and nothing may follow it.
    std::optional<ActionId> select_action(const ExecutionState& exec) const;

    /// Selects an action and applies it. Throws EpisodeFinished when the
    /// episode is over.
    void step(ExecutionState& exec) const;

    /// Applies an arbitrary action. Leaving the tree (an action that matches no
    /// child) is handled like reaching a leaf.
    void apply(ExecutionState& exec, ActionId action) const;

    /// Builds a tree at the live query. `index` selects the build's seed substream.
    std::shared_ptr<const PolicyTree> build_at(const Query& live, std::size_t index) const;

    const ControllerConfig& config() const noexcept { return config_; }
    const BuildConfig& build_config() const noexcept { return build_; }

private:
    void enter_tree(ExecutionState& exec, std::shared_ptr<const PolicyTree> tree) const;
    void leave_tree(ExecutionState& exec) const;
    std::string summarize_live(const ExecutionState& exec) const;

    const GenerativeModel& model_;
    const BaselinePolicy& policy_;
    ControllerConfig config_;
    BuildConfig build_;
    std::uint64_t seed_;
};

struct EpisodeRecord {
    double total_return = 0.0;
    double discounted_return = 0.0;
    std::size_t steps = 0;
    bool done = false;
    bool halted = false;
    std::size_t rebuilds = 0;
    std::vector<std::size_t> exit_depths;
    std::vector<double> tree_leaf_depths;
    std::vector<TraceEntry> trace;
    std::vector<std::shared_ptr<const PolicyTree>> trees;  // only kept when requested

    /// Mean depth of the last tree node executed, over the trees used.
    double mean_exit_depth() const;
    /// Mean over trees of the unweighted mean leaf depth.
    double mean_tree_leaf_depth() const;
};

EpisodeRecord run_episode(const GenerativeModel& model, const BaselinePolicy& policy, const ControllerConfig& config,
                          const BuildConfig& build, std::uint64_t seed, bool keep_trees = false);

/// Baseline-greedy episode using the same environment streams as run_episode.
EpisodeRecord run_policy_episode(const GenerativeModel& model, const BaselinePolicy& policy, std::uint64_t seed,
                                 std::size_t max_steps = 1000);

/// Uniform-random episode using the same environment streams as run_episode.
EpisodeRecord run_random_episode(const GenerativeModel& model, std::uint64_t seed, std::size_t max_steps = 1000);

}  // namespace sptree
