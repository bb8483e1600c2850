#include "sptree/tree.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <string>

namespace sptree {

void BuildConfig::validate() const {
    if (n_particles == 0) {
        throw ContractViolation("n_particles must be positive");
    }
    if (n_min == 0 || n_min > n_particles) {
        throw ContractViolation("n_min must be in [1, n_particles]");
    }
    if (d_max == 0) {
        throw ContractViolation("d_max must be positive");
    }
    if (!(delta_star >= 0.0)) {
        throw ContractViolation("delta_star must be non-negative");
    }
    if (c_max == 0) {
        throw ContractViolation("c_max must be at least 1");
    }
}

const ActionNode* ActionNode::child_with_action(ActionId a) const noexcept {
    for (const auto& c : children) {
        if (c.action == a) {
            return &c;
        }
    }
    return nullptr;
}

namespace {

void collect(const ActionNode& node, std::vector<const ActionNode*>& out) {
    out.push_back(&node);
    for (const auto& c : node.children) {
        collect(c, out);
    }
}

}  // namespace

std::vector<const ActionNode*> PolicyTree::nodes() const {
    std::vector<const ActionNode*> out;
    collect(root, out);
    return out;
}

std::vector<const ActionNode*> PolicyTree::leaves() const {
    std::vector<const ActionNode*> out;
    for (const auto* n : nodes()) {
        if (n->is_leaf()) {
            out.push_back(n);
        }
    }
    return out;
}

std::vector<std::size_t> PolicyTree::most_likely_path() const {
    std::vector<std::size_t> path;
    for (const ActionNode* n = &root; n != nullptr;) {
        path.push_back(n->id);
        const ActionNode* next = nullptr;
        for (const auto& c : n->children) {
            if (next == nullptr || c.particles.size() > next->particles.size() ||
                (c.particles.size() == next->particles.size() && c.action < next->action)) {
                next = &c;
            }
        }
        n = next;
    }
    return path;
}

double PolicyTree::mean_leaf_depth() const {
    const auto ls = leaves();
    double total = 0.0;
    for (const auto* l : ls) {
        total += static_cast<double>(l->depth);
    }
    return total / static_cast<double>(ls.size());
}

const ActionNode* PolicyTree::find(std::size_t id) const {
    for (const auto* n : nodes()) {
        if (n->id == id) {
            return n;
        }
    }
    return nullptr;
}

double distance(std::span<const double> scores, ActionId action, ScoreKind kind) {
    if (action.index >= scores.size()) {
        throw ContractViolation("action out of range for score vector");
    }
    const double best = *std::max_element(scores.begin(), scores.end());
    if (kind == ScoreKind::ActionValues) {
        return std::fabs(scores[action.index] - best);
    }
    return best - scores[action.index];
}

double distance(const BaselinePolicy& policy, const Particle& particle, ActionId action) {
    const auto s = policy.scores(particle);
    return distance(s, action, policy.kind());
}

std::vector<ActionId> rank_actions(std::span<const ActionId> greedy) {
    std::map<ActionId, std::size_t> counts;
    for (ActionId a : greedy) {
        ++counts[a];
    }
    std::vector<std::pair<ActionId, std::size_t>> ranked(counts.begin(), counts.end());
    // map iteration is already in ascending id order, so a stable sort keeps id tie-breaks
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<ActionId> out;
    out.reserve(ranked.size());
    for (const auto& [a, n] : ranked) {
        out.push_back(a);
    }
    return out;
}

std::vector<ActionId> unique_actions(std::span<const Particle> particles, const BaselinePolicy& policy) {
    if (particles.empty()) {
        throw ContractViolation("unique_actions needs particles");
    }
    std::vector<ActionId> greedy;
    greedy.reserve(particles.size());
    for (const auto& p : particles) {
        greedy.push_back(argmax_action(policy.scores(p)));
    }
    return rank_actions(greedy);
}

namespace {

/// Clustering inputs computed once per expansion.
struct ScoredSet {
    std::vector<std::vector<double>> scores;
    std::vector<ActionId> greedy;
    std::vector<ActionId> ranked;
};

ScoredSet score_particles(std::span<const Particle> particles, const BaselinePolicy& policy) {
    ScoredSet set;
    set.scores.reserve(particles.size());
    set.greedy.reserve(particles.size());
    for (const auto& p : particles) {
        auto s = policy.scores(p);
        if (s.size() != policy.action_count()) {
            throw ContractViolation("policy score vector has wrong length");
        }
        set.greedy.push_back(argmax_action(s));
        set.scores.push_back(std::move(s));
    }
    set.ranked = rank_actions(set.greedy);
    return set;
}

struct Assignment {
    std::vector<ActionId> actions;    // one per cluster, in ranked order
    std::vector<std::size_t> owner;   // cluster index per particle
    double delta = 0.0;
};

Assignment greedy_assign(const ScoredSet& set, std::size_t k, ScoreKind kind, DeltaAggregation mode) {
    Assignment out;
    const std::size_t used = std::min(k, set.ranked.size());
    out.actions.assign(set.ranked.begin(), set.ranked.begin() + static_cast<std::ptrdiff_t>(used));
    out.owner.resize(set.greedy.size());

    double total = 0.0;
    for (std::size_t i = 0; i < set.greedy.size(); ++i) {
        auto match = std::find(out.actions.begin(), out.actions.end(), set.greedy[i]);
        if (match != out.actions.end()) {
            out.owner[i] = static_cast<std::size_t>(match - out.actions.begin());
            continue;
        }
        std::size_t best = 0;
        double best_d = distance(set.scores[i], out.actions[0], kind);
        for (std::size_t c = 1; c < out.actions.size(); ++c) {
            const double d = distance(set.scores[i], out.actions[c], kind);
            if (d < best_d || (d == best_d && out.actions[c] < out.actions[best])) {
                best = c;
                best_d = d;
            }
        }
        out.owner[i] = best;
        total += best_d;
    }
    out.delta = mode == DeltaAggregation::Mean ? total / static_cast<double>(set.greedy.size()) : total;
    return out;
}

std::vector<ActionNode> materialize(std::vector<Particle> particles, const Assignment& assignment) {
    std::vector<ActionNode> nodes(assignment.actions.size());
    for (std::size_t c = 0; c < nodes.size(); ++c) {
        nodes[c].action = assignment.actions[c];
    }
    for (std::size_t i = 0; i < particles.size(); ++i) {
        nodes[assignment.owner[i]].particles.push_back(std::move(particles[i]));
    }
    return nodes;
}

}  // namespace

ClusterResult greedy_cluster(std::vector<Particle> particles, std::size_t k, const BaselinePolicy& policy,
                             DeltaAggregation mode) {
    if (k == 0) {
        throw ContractViolation("greedy_cluster needs k >= 1");
    }
    if (particles.empty()) {
        throw ContractViolation("greedy_cluster needs particles");
    }
    const auto set = score_particles(particles, policy);
    const auto assignment = greedy_assign(set, k, policy.kind(), mode);
    ClusterResult result;
    result.delta = assignment.delta;
    result.nodes = materialize(std::move(particles), assignment);
    return result;
}

std::vector<ActionNode> cluster(std::vector<Particle> particles, const BaselinePolicy& policy,
                                const BuildConfig& config) {
    if (particles.empty()) {
        throw ContractViolation("cluster needs particles");
    }
    const auto set = score_particles(particles, policy);
    Assignment assignment;
    for (std::size_t k = 1;; ++k) {
        assignment = greedy_assign(set, k, policy.kind(), config.delta_mode);
        if (assignment.delta <= config.delta_star || assignment.actions.size() >= config.c_max ||
            k >= set.ranked.size()) {
            break;
        }
    }
    return materialize(std::move(particles), assignment);
}

ActionNode rollout(ActionNode node, const GenerativeModel& model, const BaselinePolicy& policy, std::size_t depth,
                   const BuildConfig& config) {
    node.depth = depth;
    if (node.particles.empty()) {
        throw ContractViolation("rollout needs a non-empty node");
    }
    if (node.particles.size() < config.n_min || depth >= config.d_max) {
        return node;
    }

    node.expanded = true;
    const double gamma = model.discount();
    std::vector<Particle> survivors;
    survivors.reserve(node.particles.size());
    for (const auto& p : node.particles) {
        Rng rng(derive_seed(config.seed, {stream::kParticle, p.trajectory, depth}));
        StepResult r = model.step(p.state, node.action, rng);
        if (r.done) {
            ++node.terminated;
            node.terminal_reward_sum += r.reward;
            continue;
        }
        Particle next;
        next.reward = r.reward;
        next.cumulative_discount = p.cumulative_discount * gamma;
        next.trajectory = p.trajectory;
        if (p.belief) {
            if (!r.observation) {
                throw ContractViolation("partially observable step returned no observation");
            }
            Rng belief_rng(derive_seed(config.seed, {stream::kBelief, p.trajectory, depth}));
            next.belief =
                std::make_shared<const Belief>(update_belief(model, *p.belief, node.action, *r.observation, belief_rng).belief);
        }
        next.observation = std::move(r.observation);
        next.state = std::move(r.next_state);
        survivors.push_back(std::move(next));
    }
    node.terminal_fraction = static_cast<double>(node.terminated) / static_cast<double>(node.particles.size());
    if (survivors.empty()) {
        return node;
    }

    auto clusters = cluster(std::move(survivors), policy, config);
    node.children.reserve(clusters.size());
    for (auto& c : clusters) {
        node.children.push_back(rollout(std::move(c), model, policy, depth + 1, config));
    }
    return node;
}

PolicyTree build_tree(const GenerativeModel& model, const BaselinePolicy& policy, const Query& initial,
                      const BuildConfig& config) {
    config.validate();
    if (policy.action_count() != model.action_count()) {
        throw ContractViolation("policy and model disagree on the action count");
    }
    const auto start = std::chrono::steady_clock::now();

    if (const auto* s = std::get_if<StateVector>(&initial)) {
        model.check_state(*s);
        if (model.is_terminal(*s)) {
            throw ContractViolation("terminal initial state");
        }
    } else {
        const auto& b = std::get<Belief>(initial);
        b.validate();
        if (std::all_of(b.hypotheses.begin(), b.hypotheses.end(),
                        [&](const StateVector& h) { return model.is_terminal(h); })) {
            throw ContractViolation("terminal initial state");
        }
    }

    PolicyTree tree;
    tree.config = config;
    tree.initial = initial;
    tree.n_initial = config.n_particles;

    tree.root.particles = sample_initial_particles(model, initial, config.n_particles, config.seed);
    tree.root.scores = policy.scores(initial);
    tree.root.action = argmax_action(tree.root.scores);
    tree.root = rollout(std::move(tree.root), model, policy, 0, config);

    tree = annotate_statistics(std::move(tree), policy);
    tree.stats.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return tree;
}

namespace {

void annotate_node(ActionNode& node, const BaselinePolicy& policy, std::size_t n_initial, std::size_t& next_id,
                   BuildStats& stats) {
    node.id = next_id++;
    node.reach_probability = static_cast<double>(node.particles.size()) / static_cast<double>(n_initial);
    double total = 0.0;
    for (const auto& p : node.particles) {
        total += policy.scores(p)[node.action.index];
    }
    node.value_estimate = node.particles.empty() ? 0.0 : total / static_cast<double>(node.particles.size());
    node.on_likely_path = false;
    ++stats.node_count;
    if (node.expanded) {
        stats.particles_stepped += node.particles.size();
    }
    for (auto& c : node.children) {
        annotate_node(c, policy, n_initial, next_id, stats);
    }
}

}  // namespace

PolicyTree annotate_statistics(PolicyTree tree, const BaselinePolicy& policy) {
    if (tree.n_initial == 0) {
        throw ContractViolation("tree has no initial particles");
    }
    std::size_t next_id = 0;
    tree.stats.node_count = 0;
    tree.stats.particles_stepped = 0;
    annotate_node(tree.root, policy, tree.n_initial, next_id, tree.stats);

    for (ActionNode* n = &tree.root; n != nullptr;) {
        n->on_likely_path = true;
        ActionNode* next = nullptr;
        for (auto& c : n->children) {
            if (next == nullptr || c.particles.size() > next->particles.size() ||
                (c.particles.size() == next->particles.size() && c.action < next->action)) {
                next = &c;
            }
        }
        n = next;
    }
    return tree;
}

StateSummary summarize_node_states(const ActionNode& node, SummaryKind kind) {
    if (node.particles.empty()) {
        throw ContractViolation("cannot summarize an empty node");
    }
    StateSummary out;
    out.kind = kind;
    if (kind == SummaryKind::Mean) {
        const std::size_t dim = node.particles.front().state.size();
        out.values.assign(dim, 0.0);
        for (const auto& p : node.particles) {
            for (std::size_t i = 0; i < dim; ++i) {
                out.values[i] += p.state[i];
            }
        }
        for (double& v : out.values) {
            v /= static_cast<double>(node.particles.size());
        }
        out.support = node.particles.size();
        return out;
    }

    std::map<std::vector<double>, std::size_t> counts;
    for (const auto& p : node.particles) {
        if (kind == SummaryKind::Mode) {
            ++counts[p.state];
        } else if (p.observation) {
            ++counts[*p.observation];
        }
    }
    if (counts.empty()) {
        // Root particles carry no observation yet.
        return out;
    }
    // Highest count; the map's lexicographic order settles ties.
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it) {
        if (it->second > best->second) {
            best = it;
        }
    }
    out.values = best->first;
    out.support = best->second;
    return out;
}

}  // namespace sptree
