#pragma once

// Small models and policies shared by the unit and acceptance tests.

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "sptree/baselines/value_iteration.hpp"
#include "sptree/enumerable.hpp"
#include "sptree/env/grid_world.hpp"
#include "sptree/mdp.hpp"
#include "sptree/tree.hpp"

namespace sptree::testing {

/// Deterministic single-action chain: state (i), reward -1 per step, done on reaching `length`.
class ChainModel final : public GenerativeModel {
public:
    explicit ChainModel(std::size_t length, std::size_t actions = 1) : length_(length), actions_(actions) {}

    std::size_t action_count() const override { return actions_; }
    std::size_t state_dimension() const override { return 1; }
    double discount() const override { return 1.0; }
    StepResult step(const StateVector& s, ActionId a, Rng&) const override {
        check_action(a);
        StepResult r;
        r.next_state = {s[0] + 1.0};
        r.reward = -1.0;
        r.done = r.next_state[0] >= static_cast<double>(length_);
        return r;
    }
    bool is_terminal(const StateVector& s) const override { return s[0] >= static_cast<double>(length_); }
    StateVector initial_state(Rng&) const override { return {0.0}; }

private:
    std::size_t length_;
    std::size_t actions_;
};

/// Policy with scores computed by a function of the state.
class FunctionPolicy final : public BaselinePolicy {
public:
    using Fn = std::function<std::vector<double>(const StateVector&)>;
    FunctionPolicy(std::size_t actions, std::size_t dim, Fn fn, ScoreKind kind = ScoreKind::ActionValues)
        : actions_(actions), dim_(dim), fn_(std::move(fn)), kind_(kind) {}

    ScoreKind kind() const override { return kind_; }
    std::size_t action_count() const override { return actions_; }
    std::size_t state_dimension() const override { return dim_; }
    std::vector<double> scores(const StateVector& s) const override { return fn_(s); }
    using BaselinePolicy::scores;

private:
    std::size_t actions_;
    std::size_t dim_;
    Fn fn_;
    ScoreKind kind_;
};

inline std::shared_ptr<FunctionPolicy> constant_policy(std::vector<double> scores, std::size_t dim = 1) {
    const std::size_t n = scores.size();
    return std::make_shared<FunctionPolicy>(n, dim, [scores](const StateVector&) { return scores; });
}

/// Random deterministic MDP given by explicit tables. State vector is (index).
class TableMdp final : public GenerativeModel, public EnumerableMdp {
public:
    TableMdp(std::size_t states, std::size_t actions, Rng& rng, double terminal_fraction = 0.1) {
        n_ = states;
        k_ = actions;
        next_.resize(n_ * k_);
        reward_.resize(n_ * k_);
        terminal_.assign(n_, false);
        for (std::size_t s = 1; s < n_; ++s) {
            terminal_[s] = rng.uniform() < terminal_fraction;
        }
        terminal_[n_ - 1] = true;
        for (std::size_t i = 0; i < n_ * k_; ++i) {
            next_[i] = rng.below(n_);
            reward_[i] = std::round(rng.uniform() * 20.0 - 10.0) / 4.0;
        }
    }

    // GenerativeModel
    std::size_t action_count() const override { return k_; }
    std::size_t state_dimension() const override { return 1; }
    double discount() const override { return 0.9; }
    StepResult step(const StateVector& s, ActionId a, Rng&) const override {
        const auto i = static_cast<std::size_t>(s[0]) * k_ + a.index;
        StepResult r;
        r.next_state = {static_cast<double>(next_[i])};
        r.reward = reward_[i];
        r.done = terminal_[next_[i]];
        return r;
    }
    bool is_terminal(const StateVector& s) const override { return terminal_[static_cast<std::size_t>(s[0])]; }
    StateVector initial_state(Rng&) const override { return {0.0}; }
    const EnumerableMdp* enumerable() const override { return this; }

    // EnumerableMdp
    std::size_t state_count() const override { return n_; }
    bool is_terminal(std::size_t s) const override { return terminal_[s]; }
    std::vector<Transition> transitions(std::size_t s, ActionId a) const override {
        const auto i = s * k_ + a.index;
        return {Transition{1.0, next_[i], reward_[i], terminal_[next_[i]]}};
    }
    std::size_t index_of(const StateVector& s) const override { return static_cast<std::size_t>(s[0]); }
    StateVector state_of(std::size_t i) const override { return {static_cast<double>(i)}; }

    std::size_t next(std::size_t s, std::size_t a) const { return next_[s * k_ + a]; }
    double reward(std::size_t s, std::size_t a) const { return reward_[s * k_ + a]; }

private:
    std::size_t n_ = 0;
    std::size_t k_ = 0;
    std::vector<std::size_t> next_;
    std::vector<double> reward_;
    std::vector<bool> terminal_;
};

/// Three cells in a row, start at the left end, goal at the right end.
inline env::GridWorldParams corridor() {
    env::GridWorldParams p;
    p.width = 3;
    p.height = 1;
    p.p_success = 1.0;
    p.start = {0, 0};
    p.goals = {{2, 0}};
    p.traps = {};
    p.discount = 1.0;
    p.max_steps = 20;
    return p;
}

struct SolvedGrid {
    std::shared_ptr<const env::GridWorld> model;
    std::shared_ptr<const baselines::ValueTable> table;
    std::shared_ptr<const baselines::ValueTablePolicy> policy;
};

inline SolvedGrid solve_grid(const env::GridWorldParams& params, double tol = 1e-10) {
    SolvedGrid g;
    g.model = std::make_shared<const env::GridWorld>(params);
    g.table = std::make_shared<const baselines::ValueTable>(
        baselines::value_iteration(static_cast<const EnumerableMdp&>(*g.model), params.discount, tol));
    g.policy = std::make_shared<const baselines::ValueTablePolicy>(g.table, g.model);
    return g;
}

template <typename Mdp>
std::shared_ptr<const baselines::ValueTablePolicy> solve_table(std::shared_ptr<const Mdp> model, double gamma) {
    auto table = std::make_shared<const baselines::ValueTable>(
        baselines::value_iteration(static_cast<const EnumerableMdp&>(*model), gamma, 1e-12));
    return std::make_shared<const baselines::ValueTablePolicy>(table, model);
}

/// Every root-to-leaf action sequence of a tree.
inline void collect_paths(const ActionNode& node, std::vector<std::size_t>& prefix,
                          std::vector<std::vector<std::size_t>>& out) {
    prefix.push_back(node.action.index);
    if (node.children.empty()) {
        out.push_back(prefix);
    }
    for (const auto& c : node.children) {
        collect_paths(c, prefix, out);
    }
    prefix.pop_back();
}

/// Small random grid for property tests.
inline env::GridWorldParams random_small_grid(Rng& rng) {
    env::GridWorldParams p;
    p.width = 3 + static_cast<int>(rng.below(4));
    p.height = 3 + static_cast<int>(rng.below(4));
    p.n_actions = 4 * (1 + rng.below(2));
    p.p_success = 0.5 + 0.5 * rng.uniform();
    p.start = {0, 0};
    p.goals = {{p.width - 1, p.height - 1}};
    p.traps = {{1, 1}};
    p.max_steps = 15 + rng.below(20);
    return p;
}

inline BuildConfig random_build_config(Rng& rng) {
    BuildConfig b;
    b.n_particles = 20 + rng.below(200);
    b.n_min = 1 + rng.below(b.n_particles);
    b.d_max = 1 + rng.below(8);
    const double deltas[] = {0.0, 0.001, 0.01, 0.1, 1.0, 10.0};
    b.delta_star = deltas[rng.below(6)];
    b.c_max = 1 + rng.below(5);
    b.seed = rng();
    b.delta_mode = rng.bernoulli(0.5) ? DeltaAggregation::Mean : DeltaAggregation::Sum;
    return b;
}

}  // namespace sptree::testing
