#include "sptree/executor.hpp"

#include <numeric>

namespace sptree {

void ControllerConfig::validate() const {
    if (max_steps == 0) {
        throw ContractViolation("max_steps must be at least 1");
    }
}

namespace {

/// Steps the hidden state with the episode's per-step stream and refreshes the live query.
/// Every runner goes through here so paired episodes see identical environment noise.
void environment_step(const GenerativeModel& model, std::uint64_t seed, ExecutionState& exec, ActionId action) {
    Rng env_rng(derive_seed(seed, {stream::kEnvironment, exec.step_index}));
    StepResult r = model.step(exec.true_state, action, env_rng);

    exec.accumulated_return += r.reward;
    exec.discounted_return += exec.discount_factor * r.reward;
    exec.discount_factor *= model.discount();
    exec.trace.back().reward = r.reward;
    exec.done = r.done;

    if (model.partially_observable()) {
        if (!r.observation) {
            throw ContractViolation("partially observable step returned no observation");
        }
        if (!r.done) {
            Rng belief_rng(derive_seed(seed, {stream::kBelief, exec.step_index}));
            BeliefUpdate u = update_belief(model, std::get<Belief>(exec.live), action, *r.observation, belief_rng);
            exec.belief_degeneracies += u.degenerate ? 1 : 0;
            exec.live = std::move(u.belief);
        }
        exec.last_observation = std::move(r.observation);
        exec.true_state = std::move(r.next_state);
    } else {
        exec.true_state = std::move(r.next_state);
        exec.live = exec.true_state;
    }
    ++exec.step_index;
}

std::string summarize(const GenerativeModel& model, const ExecutionState& exec) {
    Particle p;
    p.state = exec.true_state;
    p.observation = exec.last_observation;
    return model.describe_particles(std::span<const Particle>(&p, 1));
}

ExecutionState bare_state(const GenerativeModel& model, std::uint64_t seed) {
    ExecutionState exec;
    exec.in_tree = false;
    exec.live = initial_query(model, seed);
    if (model.partially_observable()) {
        Rng rng(derive_seed(seed, {stream::kInitial, 1}));
        exec.true_state = model.initial_state(rng);
    } else {
        exec.true_state = std::get<StateVector>(exec.live);
    }
    return exec;
}

EpisodeRecord to_record(ExecutionState&& exec) {
    EpisodeRecord rec;
    rec.total_return = exec.accumulated_return;
    rec.discounted_return = exec.discounted_return;
    rec.steps = exec.step_index;
    rec.done = exec.done;
    rec.halted = exec.halted;
    rec.rebuilds = exec.rebuilds;
    rec.exit_depths = std::move(exec.exit_depths);
    rec.tree_leaf_depths = std::move(exec.tree_leaf_depths);
    rec.trace = std::move(exec.trace);
    return rec;
}

}  // namespace

Controller::Controller(const GenerativeModel& model, const BaselinePolicy& policy, ControllerConfig config,
                       BuildConfig build, std::uint64_t episode_seed)
    : model_(model), policy_(policy), config_(config), build_(build), seed_(episode_seed) {
    config_.validate();
    build_.validate();
}

std::shared_ptr<const PolicyTree> Controller::build_at(const Query& live, std::size_t index) const {
    BuildConfig cfg = build_;
    cfg.seed = derive_seed(seed_, {stream::kTree, index});
    return std::make_shared<const PolicyTree>(build_tree(model_, policy_, live, cfg));
}

ExecutionState Controller::start() const {
    ExecutionState exec = bare_state(model_, seed_);
    enter_tree(exec, build_at(exec.live, 0));
    return exec;
}

ExecutionState Controller::start(std::shared_ptr<const PolicyTree> tree, StateVector true_state) const {
    if (!tree) {
        throw ContractViolation("null tree");
    }
    model_.check_state(true_state);
    ExecutionState exec;
    exec.true_state = std::move(true_state);
    exec.live = tree->initial;
    enter_tree(exec, std::move(tree));
    return exec;
}

void Controller::enter_tree(ExecutionState& exec, std::shared_ptr<const PolicyTree> tree) const {
    exec.tree_leaf_depths.push_back(tree->mean_leaf_depth());
    exec.tree = std::move(tree);
    exec.current_node = nullptr;
    exec.in_tree = true;
}

void Controller::leave_tree(ExecutionState& exec) const {
    if (exec.in_tree && exec.current_node != nullptr) {
        exec.exit_depths.push_back(exec.current_node->depth);
    }
    exec.in_tree = false;
    exec.current_node = nullptr;
}

std::string Controller::summarize_live(const ExecutionState& exec) const { return summarize(model_, exec); }

std::optional<ActionId> Controller::select_action(const ExecutionState& exec) const {
    if (exec.finished()) {
        return std::nullopt;
    }
    if (!exec.in_tree) {
        return greedy_action(policy_, exec.live);
    }
    if (exec.current_node == nullptr) {
        return exec.tree->root.action;
    }
    const ActionNode& node = *exec.current_node;
    if (node.is_leaf()) {
        return std::nullopt;
    }
    const auto scores = policy_.scores(exec.live);
    const ActionNode* best = nullptr;
    for (const auto& child : node.children) {
        const double s = scores.at(child.action.index);
        if (best == nullptr || s > scores[best->action.index] ||
            (s == scores[best->action.index] && child.action < best->action)) {
            best = &child;
        }
    }
    return best->action;
}

void Controller::step(ExecutionState& exec) const {
    const auto action = select_action(exec);
    if (!action) {
        throw EpisodeFinished(exec.done ? "episode reached a terminal state" : "episode stopped at a leaf");
    }
    apply(exec, *action);
}

void Controller::apply(ExecutionState& exec, ActionId action) const {
    if (exec.finished()) {
        throw EpisodeFinished(exec.done ? "episode reached a terminal state" : "episode has stopped");
    }
    model_.check_action(action);

    bool left_tree = false;
    const ActionNode* matched = nullptr;
    if (exec.in_tree) {
        matched = exec.current_node == nullptr
                      ? (exec.tree->root.action == action ? &exec.tree->root : nullptr)
                      : exec.current_node->child_with_action(action);
        if (matched != nullptr) {
            exec.current_node = matched;
        } else {
            leave_tree(exec);
            left_tree = true;
        }
    }

    TraceEntry entry;
    entry.step = exec.step_index;
    entry.state_summary = summarize_live(exec);
    entry.action = action;
    if (matched != nullptr) {
        entry.node_id = matched->id;
    }
    entry.tree_index = exec.rebuilds;
    exec.trace.push_back(std::move(entry));

    environment_step(model_, seed_, exec, action);

    if (exec.done) {
        leave_tree(exec);
        return;
    }
    const bool at_leaf = exec.in_tree && exec.current_node != nullptr && exec.current_node->is_leaf();
    if (at_leaf || left_tree) {
        leave_tree(exec);
        if (config_.rebuild_at_leaf) {
            ++exec.rebuilds;
            enter_tree(exec, build_at(exec.live, exec.rebuilds));
        } else if (config_.fallback == LeafFallback::None) {
            exec.halted = true;
        }
    }
    if (exec.step_index >= config_.max_steps) {
        leave_tree(exec);
        exec.halted = true;
    }
}

double EpisodeRecord::mean_exit_depth() const {
    if (exit_depths.empty()) {
        return 0.0;
    }
    return static_cast<double>(std::accumulate(exit_depths.begin(), exit_depths.end(), std::size_t{0})) /
           static_cast<double>(exit_depths.size());
}

double EpisodeRecord::mean_tree_leaf_depth() const {
    if (tree_leaf_depths.empty()) {
        return 0.0;
    }
    return std::accumulate(tree_leaf_depths.begin(), tree_leaf_depths.end(), 0.0) /
           static_cast<double>(tree_leaf_depths.size());
}

EpisodeRecord run_episode(const GenerativeModel& model, const BaselinePolicy& policy, const ControllerConfig& config,
                          const BuildConfig& build, std::uint64_t seed, bool keep_trees) {
    Controller controller(model, policy, config, build, seed);
    ExecutionState exec = controller.start();
    std::vector<std::shared_ptr<const PolicyTree>> trees;
    if (keep_trees) {
        trees.push_back(exec.tree);
    }
    while (!exec.finished()) {
        const auto before = exec.tree;
        controller.step(exec);
        if (keep_trees && exec.tree != before) {
            trees.push_back(exec.tree);
        }
    }
    EpisodeRecord rec = to_record(std::move(exec));
    rec.trees = std::move(trees);
    return rec;
}

EpisodeRecord run_policy_episode(const GenerativeModel& model, const BaselinePolicy& policy, std::uint64_t seed,
                                 std::size_t max_steps) {
    ExecutionState exec = bare_state(model, seed);
    while (!exec.done && exec.step_index < max_steps) {
        const ActionId action = greedy_action(policy, exec.live);
        exec.trace.push_back(TraceEntry{exec.step_index, summarize(model, exec), action, 0.0, std::nullopt, 0});
        environment_step(model, seed, exec, action);
    }
    exec.halted = !exec.done;
    return to_record(std::move(exec));
}

EpisodeRecord run_random_episode(const GenerativeModel& model, std::uint64_t seed, std::size_t max_steps) {
    ExecutionState exec = bare_state(model, seed);
    while (!exec.done && exec.step_index < max_steps) {
        Rng pick(derive_seed(seed, {stream::kAction, exec.step_index}));
        const ActionId action{static_cast<std::size_t>(pick.below(model.action_count()))};
        exec.trace.push_back(TraceEntry{exec.step_index, summarize(model, exec), action, 0.0, std::nullopt, 0});
        environment_step(model, seed, exec, action);
    }
    exec.halted = !exec.done;
    return to_record(std::move(exec));
}

}  // namespace sptree
