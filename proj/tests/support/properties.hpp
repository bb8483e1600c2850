#pragma once

// Structural checks on built trees, shared by the unit and acceptance suites.
// Each returns an empty string when the property holds, else a description.

#include <cmath>
#include <set>
#include <sstream>
#include <string>

#include "sptree/tree.hpp"

namespace sptree::testing {

inline std::string check_node(const ActionNode& node, const BaselinePolicy& policy, const BuildConfig& config,
                              std::size_t n_initial, std::size_t depth) {
    std::ostringstream why;
    const std::size_t count = node.particles.size();
    if (node.depth != depth) {
        why << "node " << node.id << " depth " << node.depth << " != " << depth;
        return why.str();
    }
    if (node.reach_probability != static_cast<double>(count) / static_cast<double>(n_initial)) {
        why << "node " << node.id << " reach probability is not count / n_initial";
        return why.str();
    }
    if (node.children.size() > config.c_max) {
        why << "node " << node.id << " has " << node.children.size() << " children, c_max " << config.c_max;
        return why.str();
    }
    std::set<std::size_t> actions;
    std::size_t child_total = 0;
    for (const auto& c : node.children) {
        if (!actions.insert(c.action.index).second) {
            why << "node " << node.id << " has two children with action " << c.action.index;
            return why.str();
        }
        if (c.reach_probability > node.reach_probability) {
            why << "child " << c.id << " is more likely than its parent " << node.id;
            return why.str();
        }
        child_total += c.particles.size();
    }
    if (node.expanded && child_total + node.terminated != count) {
        why << "node " << node.id << ": children hold " << child_total << " + " << node.terminated
            << " terminated, parent has " << count;
        return why.str();
    }
    if (node.is_leaf()) {
        const bool justified = count < config.n_min || depth == config.d_max || node.terminal_fraction == 1.0;
        if (!justified) {
            why << "leaf " << node.id << " (count " << count << ", depth " << depth << ", terminal "
                << node.terminal_fraction << ") has no reason to stop";
            return why.str();
        }
    } else {
        if (count < config.n_min || depth >= config.d_max) {
            why << "node " << node.id << " expanded despite the gates";
            return why.str();
        }
        // Clustering error is within delta_star whenever c_max allows every greedy action its own node.
        std::set<std::size_t> greedy;
        double total = 0.0;
        std::size_t n = 0;
        for (const auto& c : node.children) {
            for (const auto& p : c.particles) {
                const auto s = policy.scores(p);
                greedy.insert(argmax_action(s).index);
                total += distance(s, c.action, policy.kind());
                ++n;
            }
        }
        const double delta = config.delta_mode == DeltaAggregation::Mean ? total / static_cast<double>(n) : total;
        if (greedy.size() <= config.c_max && delta > config.delta_star * (1.0 + 1e-12) + 1e-15) {
            why << "node " << node.id << " clustering error " << delta << " > " << config.delta_star;
            return why.str();
        }
    }
    for (const auto& c : node.children) {
        auto sub = check_node(c, policy, config, n_initial, depth + 1);
        if (!sub.empty()) {
            return sub;
        }
    }
    return {};
}

inline std::string check_tree(const PolicyTree& tree, const BaselinePolicy& policy) {
    if (tree.root.reach_probability != 1.0) {
        return "root reach probability is not 1";
    }
    const auto nodes = tree.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i]->id != i) {
            return "node ids are not a pre-order numbering";
        }
    }
    if (tree.stats.node_count != nodes.size()) {
        return "node count statistic is stale";
    }
    return check_node(tree.root, policy, tree.config, tree.n_initial, 0);
}

/// Structural equality: actions, particle counts and statistics at every node.
inline bool same_structure(const ActionNode& a, const ActionNode& b) {
    if (a.action != b.action || a.particles.size() != b.particles.size() || a.children.size() != b.children.size() ||
        a.value_estimate != b.value_estimate || a.terminated != b.terminated || a.id != b.id) {
        return false;
    }
    for (std::size_t i = 0; i < a.particles.size(); ++i) {
        if (a.particles[i].state != b.particles[i].state) {
            return false;
        }
    }
    for (std::size_t i = 0; i < a.children.size(); ++i) {
        if (!same_structure(a.children[i], b.children[i])) {
            return false;
        }
    }
    return true;
}

}  // namespace sptree::testing
