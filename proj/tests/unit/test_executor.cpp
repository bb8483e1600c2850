#include <doctest.h>

#include "fixtures.hpp"
#include "sptree/baselines/heuristics.hpp"
#include "sptree/env/cyber.hpp"
#include "sptree/executor.hpp"

using namespace sptree;
using namespace sptree::testing;

namespace {

ActionNode hand_node(std::size_t action, std::size_t depth, std::size_t id) {
    ActionNode n;
    n.action = ActionId{action};
    n.depth = depth;
    n.id = id;
    n.expanded = true;
    n.particles.resize(1);
    n.particles[0].state = {0.0};
    return n;
}

// Follows the executed node ids through the tree, checking each is a child of the last.
bool ids_form_a_path(const PolicyTree& tree, const std::vector<TraceEntry>& trace, std::size_t first,
                     std::size_t last) {
    const ActionNode* node = nullptr;
    for (std::size_t i = first; i < last; ++i) {
        if (!trace[i].node_id) {
            return false;
        }
        const ActionNode* next = node == nullptr ? &tree.root : node->child_with_action(trace[i].action);
        if (next == nullptr || next->id != *trace[i].node_id) {
            return false;
        }
        node = next;
    }
    return true;
}

}  // namespace

TEST_CASE("the root action is taken first") {
    const auto g = solve_grid(env::GridWorldParams{});
    BuildConfig b;
    b.n_particles = 100;
    b.n_min = 20;
    Controller c(*g.model, *g.policy, ControllerConfig{}, b, 7);
    auto exec = c.start();
    REQUIRE(exec.tree);
    CHECK(exec.current_node == nullptr);
    CHECK(c.select_action(exec) == exec.tree->root.action);
    CHECK(exec.tree->root.action == greedy_action(*g.policy, std::get<StateVector>(exec.live)));
    c.step(exec);
    CHECK(exec.current_node == &exec.tree->root);
    CHECK(exec.trace.front().node_id == std::optional<std::size_t>{0});
}

TEST_CASE("the constrained argmax picks the best-scoring child") {
    ChainModel chain(10, 6);
    const auto policy = constant_policy({0.9, 0.1, 0.5, 0.8, 0.2, 0.6});
    auto tree = std::make_shared<PolicyTree>();
    tree->root = hand_node(0, 0, 0);
    tree->root.children = {hand_node(2, 1, 1), hand_node(5, 1, 2)};
    tree->initial = StateVector{0.0};
    tree->n_initial = 1;
    Controller c(chain, *policy, ControllerConfig{}, BuildConfig{}, 0);
    auto exec = c.start(tree, StateVector{0.0});
    CHECK(c.select_action(exec) == ActionId{0});
    c.step(exec);
    // Unconstrained the baseline would take 0; among the children {2, 5}, 5 scores 0.6 > 0.5.
    CHECK(c.select_action(exec) == ActionId{5});

    SUBCASE("a single child is always taken") {
        tree->root.children = {hand_node(1, 1, 1)};
        auto single = c.start(tree, StateVector{0.0});
        c.step(single);
        CHECK(c.select_action(single) == ActionId{1});
    }
    SUBCASE("ties among children go to the lower action") {
        const auto flat = constant_policy({0.0, 0.0, 0.3, 0.0, 0.0, 0.3});
        Controller tied(chain, *flat, ControllerConfig{}, BuildConfig{}, 0);
        auto e = tied.start(tree, StateVector{0.0});
        tied.step(e);
        CHECK(tied.select_action(e) == ActionId{2});
    }
}

TEST_CASE("a chain model's episode follows the tree's only path") {
    ChainModel chain(5);
    const auto policy = constant_policy({1.0});
    BuildConfig b;
    b.n_particles = 10;
    b.n_min = 1;
    ControllerConfig cc;
    cc.fallback = LeafFallback::None;
    const auto rec = run_episode(chain, *policy, cc, b, 3, true);
    REQUIRE(rec.trees.size() == 1);
    CHECK(rec.steps == 5);
    CHECK(rec.done);
    CHECK(rec.total_return == -5.0);
    CHECK(ids_form_a_path(*rec.trees[0], rec.trace, 0, rec.trace.size()));
    CHECK(rec.exit_depths == std::vector<std::size_t>{4});
}

TEST_CASE("the baseline takes over after a leaf") {
    ChainModel chain(6);
    const auto policy = constant_policy({1.0});
    BuildConfig b;
    b.n_particles = 10;
    b.n_min = 1;
    b.d_max = 2;
    const auto rec = run_episode(chain, *policy, ControllerConfig{}, b, 3);
    CHECK(rec.steps == 6);
    CHECK(rec.done);
    for (std::size_t i = 0; i < rec.trace.size(); ++i) {
        CHECK(rec.trace[i].node_id.has_value() == (i <= 2));
    }
    CHECK(rec.exit_depths == std::vector<std::size_t>{2});
}

TEST_CASE("with deterministic moves the tree policy earns the baseline return") {
    env::GridWorldParams p;
    p.p_success = 1.0;
    const auto g = solve_grid(p);
    BuildConfig b;
    b.n_particles = 50;
    b.n_min = 10;
    b.d_max = 6;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto base = run_policy_episode(*g.model, *g.policy, seed);
        const auto tree = run_episode(*g.model, *g.policy, ControllerConfig{}, b, seed);
        REQUIRE(tree.total_return == base.total_return);
        REQUIRE(tree.steps == base.steps);
    }
}

TEST_CASE("the corridor episode collects 8") {
    const auto g = solve_grid(corridor());
    BuildConfig b;
    b.n_particles = 20;
    b.n_min = 1;
    const auto rec = run_episode(*g.model, *g.policy, ControllerConfig{}, b, 0);
    CHECK(rec.total_return == 8.0);
    CHECK(rec.steps == 2);
    CHECK(run_policy_episode(*g.model, *g.policy, 0).total_return == 8.0);
}

TEST_CASE("max_steps 1 takes only the root action") {
    const auto g = solve_grid(env::GridWorldParams{});
    ControllerConfig cc;
    cc.max_steps = 1;
    BuildConfig b;
    b.n_particles = 50;
    b.n_min = 10;
    const auto rec = run_episode(*g.model, *g.policy, cc, b, 2, true);
    CHECK(rec.steps == 1);
    CHECK(rec.halted);
    CHECK(rec.trace.front().action == rec.trees.front()->root.action);
    cc.max_steps = 0;
    CHECK_THROWS_AS(Controller(*g.model, *g.policy, cc, b, 0), ContractViolation);
}

TEST_CASE("without rebuilding or fallback every action comes from one root-to-leaf path") {
    Rng rng(41);
    for (int trial = 0; trial < 60; ++trial) {
        const auto g = solve_grid(random_small_grid(rng));
        const auto b = random_build_config(rng);
        ControllerConfig cc;
        cc.fallback = LeafFallback::None;
        const auto rec = run_episode(*g.model, *g.policy, cc, b, rng(), true);
        REQUIRE(rec.trees.size() == 1);
        const auto& tree = *rec.trees[0];
        REQUIRE(ids_form_a_path(tree, rec.trace, 0, rec.trace.size()));
        const ActionNode* last = tree.find(*rec.trace.back().node_id);
        REQUIRE(last != nullptr);
        // The episode ends at a leaf unless the environment or the step cap ended it first.
        REQUIRE((rec.done || last->is_leaf() || rec.steps == cc.max_steps));
        REQUIRE(rec.rebuilds == 0);
    }
}

TEST_CASE("every expanded node offers a child for any live state") {
    const auto g = solve_grid(env::GridWorldParams{});
    BuildConfig b;
    b.n_particles = 200;
    b.n_min = 20;
    b.d_max = 5;
    const auto tree = std::make_shared<const PolicyTree>(build_tree(*g.model, *g.policy, initial_query(*g.model, 0), b));
    Controller c(*g.model, *g.policy, ControllerConfig{}, b, 0);
    for (const ActionNode* node : tree->nodes()) {
        if (node->is_leaf()) {
            continue;
        }
        for (std::size_t s = 0; s < g.model->state_count(); ++s) {
            ExecutionState exec = c.start(tree, g.model->state_of(s));
            exec.current_node = node;
            exec.live = g.model->state_of(s);
            const auto a = c.select_action(exec);
            REQUIRE(a);
            REQUIRE(node->child_with_action(*a) != nullptr);
        }
    }
}

TEST_CASE("rebuilding at leaves keeps the episode inside trees") {
    const auto g = solve_grid(env::GridWorldParams{});
    BuildConfig b;
    b.n_particles = 50;
    b.n_min = 10;
    b.d_max = 2;
    ControllerConfig cc;
    cc.rebuild_at_leaf = true;
    const auto rec = run_episode(*g.model, *g.policy, cc, b, 5, true);
    CHECK(rec.rebuilds >= 1);
    CHECK(rec.trees.size() == rec.rebuilds + 1);
    CHECK(rec.tree_leaf_depths.size() == rec.rebuilds + 1);
    for (const auto& e : rec.trace) {
        REQUIRE(e.node_id.has_value());
    }
    // Tree indices count up by at most one per step.
    for (std::size_t i = 1; i < rec.trace.size(); ++i) {
        REQUIRE(rec.trace[i].tree_index - rec.trace[i - 1].tree_index <= 1);
    }
    // Rebuilt trees are rooted at the state where the previous one ran out.
    for (std::size_t k = 1; k < rec.trees.size(); ++k) {
        std::size_t first = 0;
        while (rec.trace[first].tree_index != k) {
            ++first;
        }
        REQUIRE(rec.trace[first].action == rec.trees[k]->root.action);
    }
}

TEST_CASE("a finished episode refuses further steps") {
    const auto g = solve_grid(corridor());
    BuildConfig b;
    b.n_particles = 10;
    b.n_min = 1;
    Controller c(*g.model, *g.policy, ControllerConfig{}, b, 0);
    auto exec = c.start();
    c.step(exec);
    c.step(exec);
    CHECK(exec.done);
    CHECK_FALSE(c.select_action(exec));
    CHECK_THROWS_AS(c.step(exec), EpisodeFinished);
    CHECK_THROWS_AS(c.apply(exec, ActionId{0}), EpisodeFinished);

    const auto grid = solve_grid(env::GridWorldParams{});
    ControllerConfig stop;
    stop.fallback = LeafFallback::None;
    b.d_max = 1;
    b.n_min = 10;
    Controller halting(*grid.model, *grid.policy, stop, b, 0);
    auto h = halting.start();
    halting.step(h);
    CHECK_FALSE(h.halted);
    halting.step(h);
    CHECK(h.halted);
    CHECK_FALSE(h.done);
    CHECK_THROWS_AS(halting.step(h), EpisodeFinished);
}

TEST_CASE("an override outside the tree hands control to the baseline") {
    const auto g = solve_grid(env::GridWorldParams{});
    BuildConfig b;
    b.n_particles = 50;
    b.n_min = 10;
    Controller c(*g.model, *g.policy, ControllerConfig{}, b, 1);
    auto exec = c.start();
    const auto root = exec.tree->root.action;
    const ActionId other{(root.index + 1) % 4};
    c.apply(exec, other);
    CHECK_FALSE(exec.in_tree);
    CHECK_FALSE(exec.trace.back().node_id);
    CHECK(exec.exit_depths.empty());
    CHECK(c.select_action(exec) == greedy_action(*g.policy, exec.live));
    CHECK_THROWS_AS(c.apply(exec, ActionId{99}), ContractViolation);
}

TEST_CASE("paired runners see the same environment noise") {
    const auto g = solve_grid(env::GridWorldParams{});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto a = run_policy_episode(*g.model, *g.policy, seed);
        const auto b = run_policy_episode(*g.model, *g.policy, seed);
        REQUIRE(a.total_return == b.total_return);
        const auto r1 = run_random_episode(*g.model, seed);
        const auto r2 = run_random_episode(*g.model, seed);
        REQUIRE(r1.total_return == r2.total_return);
        REQUIRE(r1.steps == r2.steps);
    }
    // The root action is the baseline's first action, so the first transition matches.
    BuildConfig b;
    b.n_particles = 10;
    b.n_min = 5;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto base = run_policy_episode(*g.model, *g.policy, seed);
        const auto tree = run_episode(*g.model, *g.policy, ControllerConfig{}, b, seed);
        REQUIRE(tree.trace[0].action == base.trace[0].action);
        REQUIRE(tree.trace[0].reward == base.trace[0].reward);
        REQUIRE(tree.trace[1].state_summary == base.trace[1].state_summary);
    }
}

TEST_CASE("cyber episodes run on beliefs") {
    const auto model = std::make_shared<const env::CyberModel>(env::CyberParams{});
    baselines::ScriptedCyberPolicy policy(model);
    BuildConfig b;
    b.n_particles = 60;
    b.n_min = 15;
    b.d_max = 3;
    ControllerConfig cc;
    cc.rebuild_at_leaf = true;
    cc.max_steps = 12;
    Controller c(*model, policy, cc, b, 4);
    auto exec = c.start();
    while (!exec.finished()) {
        c.step(exec);
        if (!exec.done) {
            const auto& belief = std::get<Belief>(exec.live);
            REQUIRE_NOTHROW(belief.validate());
        }
    }
    CHECK(exec.step_index <= 12);
    CHECK(exec.trace.size() == exec.step_index);
}
