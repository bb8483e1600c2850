#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "sptree/env/cyber.hpp"
#include "sptree/env/grid_world.hpp"

using namespace sptree;
using namespace sptree::testing;

namespace {

env::CyberParams quiet_cyber() {
    env::CyberParams p;
    p.p_attack_spread = 0.0;
    p.p_spontaneous_alert = 0.0;
    p.p_false_alert = 0.0;
    return p;
}

double weight_on(const Belief& b, const StateVector& s) {
    double w = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (b.hypotheses[i] == s) {
            w += b.weights[i];
        }
    }
    return w;
}

StateVector advanced(StateVector s, const env::CyberModel& m) {
    s[m.node_count()] += 1.0;
    return s;
}

}  // namespace

TEST_CASE("greedy_action takes the argmax with lowest-index ties") {
    CHECK(argmax_action(std::vector{0.2, 0.9, 0.9}) == ActionId{1});
    CHECK(argmax_action(std::vector{5.0}) == ActionId{0});
    CHECK(greedy_action(*constant_policy({0.2, 0.9, 0.9}), StateVector{0.0}) == ActionId{1});
    CHECK_THROWS_AS(argmax_action(std::vector<double>{}), ContractViolation);
}

TEST_CASE("greedy_action rejects a query of the wrong dimension") {
    auto policy = constant_policy({1.0, 2.0}, 2);
    CHECK_THROWS_AS(greedy_action(*policy, StateVector{0.0}), ContractViolation);
}

TEST_CASE("greedy_action next to the corridor goal steps into the goal") {
    const auto g = solve_grid(corridor());
    // East is action 1; from the middle cell it enters the goal.
    CHECK(greedy_action(*g.policy, env::GridWorld::encode({1, 0}, 0)) == ActionId{1});
}

TEST_CASE("argmax is invariant under shifts and positive rescaling") {
    Rng rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng.below(8);
        std::vector<double> s(n);
        for (auto& v : s) {
            v = std::round(rng.uniform() * 8.0);  // coarse values so ties occur
        }
        const double shift = rng.uniform() * 100.0 - 50.0;
        const double scale = 0.25 + rng.uniform() * 4.0;
        std::vector<double> t(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = s[i] * scale + shift;
        }
        // Gaps of at least 0.25 survive the affine map without rounding into ties.
        REQUIRE(argmax_action(s) == argmax_action(t));
    }
}

TEST_CASE("sample_initial_particles copies the MDP start state") {
    ChainModel chain(5);
    const auto ps = sample_initial_particles(chain, StateVector{0.0}, 3, 1);
    REQUIRE(ps.size() == 3);
    for (const auto& p : ps) {
        CHECK(p.state == StateVector{0.0});
        CHECK(p.reward == 0.0);
        CHECK(p.cumulative_discount == 1.0);
        CHECK_FALSE(p.belief);
        CHECK_FALSE(p.observation);
    }
    CHECK(sample_initial_particles(chain, 1000, 4).size() == 1000);
    CHECK_THROWS_AS(sample_initial_particles(chain, StateVector{0.0}, 0, 1), ContractViolation);
}

TEST_CASE("sample_initial_particles for MDPs has zero spread across seeds") {
    const auto g = solve_grid(env::GridWorldParams{});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto ps = sample_initial_particles(*g.model, 50, seed);
        for (const auto& p : ps) {
            REQUIRE(p.state == ps.front().state);
        }
    }
}

TEST_CASE("sample_initial_particles from a point-mass belief") {
    env::CyberModel m(quiet_cyber());
    StateVector s(m.state_dimension(), 0.0);
    s[m.workstation(1, 2)] = 1.0;
    const auto b = Belief::point_mass(s);
    const auto ps = sample_initial_particles(m, b, 10, 3);
    for (const auto& p : ps) {
        CHECK(p.state == s);
        REQUIRE(p.belief);
        CHECK(*p.belief == b);
    }
}

TEST_CASE("update_belief on a point mass with an exact observation") {
    auto params = quiet_cyber();
    params.p_detect = 1.0;
    env::CyberModel m(params);
    StateVector s(m.state_dimension(), 0.0);
    s[m.workstation(0, 3)] = 1.0;
    Observation obs(m.host_count(), 0.0);
    obs[m.workstation(0, 3)] = 1.0;
    Rng rng(1);
    const auto u = update_belief(m, Belief::point_mass(s), m.scan_action(0), obs, rng);
    CHECK_FALSE(u.degenerate);
    CHECK(weight_on(u.belief, advanced(s, m)) == doctest::Approx(1.0));
}

TEST_CASE("update_belief drops a hypothesis the observation rules out") {
    auto params = quiet_cyber();
    params.p_detect = 1.0;
    env::CyberModel m(params);
    StateVector h1(m.state_dimension(), 0.0);
    StateVector h2 = h1;
    h1[m.workstation(0, 0)] = 1.0;
    h2[m.workstation(2, 0)] = 1.0;
    Observation obs(m.host_count(), 0.0);
    obs[m.workstation(0, 0)] = 1.0;
    Rng rng(2);
    const auto u = update_belief(m, Belief::uniform({h1, h2}), m.scan_action(0), obs, rng);
    CHECK(weight_on(u.belief, advanced(h1, m)) == doctest::Approx(1.0));
    CHECK(weight_on(u.belief, advanced(h2, m)) == 0.0);
}

TEST_CASE("update_belief matches a hand Bayes update after a clean LAN scan") {
    // Two equally likely hypotheses: a workstation in LAN 1 (scanned) or in LAN 3
    // (not scanned). An all-clear scan of LAN 1 has likelihood 1 - p_detect under
    // the first and 1 under the second.
    for (double pd : {0.3, 0.8, 0.95}) {
        auto params = quiet_cyber();
        params.p_detect = pd;
        env::CyberModel m(params);
        StateVector h1(m.state_dimension(), 0.0);
        StateVector h2 = h1;
        h1[m.workstation(0, 4)] = 1.0;
        h2[m.workstation(2, 4)] = 1.0;
        const Observation clear(m.host_count(), 0.0);
        Rng rng(3);
        const auto u = update_belief(m, Belief::uniform({h1, h2}), m.scan_action(0), clear, rng);
        const double expected = 0.5 * (1.0 - pd) / (0.5 * (1.0 - pd) + 0.5);
        // Two hypotheses keep an effective sample size of at least one, so no resampling.
        CHECK(u.belief.size() == 2);
        CHECK(weight_on(u.belief, advanced(h1, m)) == doctest::Approx(expected).epsilon(1e-12));
        CHECK(weight_on(u.belief, advanced(h2, m)) == doctest::Approx(1.0 - expected).epsilon(1e-12));
    }
}

TEST_CASE("update_belief falls back to uniform weights when every hypothesis is ruled out") {
    auto params = quiet_cyber();
    params.p_detect = 1.0;
    env::CyberModel m(params);
    StateVector h(m.state_dimension(), 0.0);
    h[m.workstation(0, 0)] = 1.0;
    const Observation clear(m.host_count(), 0.0);
    Rng rng(4);
    const auto u = update_belief(m, Belief::uniform({h, h}), m.scan_action(0), clear, rng);
    CHECK(u.degenerate);
    CHECK(u.belief.weights == std::vector{0.5, 0.5});
    CHECK_THROWS_AS(update_belief(m, Belief{}, m.scan_action(0), clear, rng), ContractViolation);
}

TEST_CASE("update_belief keeps weights normalized") {
    env::CyberModel m(env::CyberParams{});
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        Belief b = m.initial_belief();
        StateVector truth = m.initial_state(rng);
        for (int t = 0; t < 6 && !m.is_terminal(truth); ++t) {
            const ActionId a{rng.below(m.action_count())};
            auto r = m.step(truth, a, rng);
            if (r.done) {
                break;
            }
            truth = r.next_state;
            auto u = update_belief(m, b, a, *r.observation, rng);
            double sum = 0.0;
            for (double w : u.belief.weights) {
                REQUIRE(w >= 0.0);
                sum += w;
            }
            REQUIRE(std::abs(sum - 1.0) <= 1e-9);
            u.belief.validate();
            b = std::move(u.belief);
        }
    }
}

TEST_CASE("steps are bit-identical for identical seeds") {
    const env::GridWorld grid(env::GridWorldParams{});
    env::CyberModel cyber(env::CyberParams{});
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng a(seed);
        Rng b(seed);
        StateVector s = grid.initial_state(a);
        (void)grid.initial_state(b);
        StateVector c = cyber.initial_state(a);
        REQUIRE(c == cyber.initial_state(b));
        for (int t = 0; t < 20; ++t) {
            const ActionId act{static_cast<std::size_t>(t % 4)};
            const auto r1 = grid.step(s, act, a);
            const auto r2 = grid.step(s, act, b);
            REQUIRE(r1.next_state == r2.next_state);
            REQUIRE(r1.reward == r2.reward);
            if (!cyber.is_terminal(c)) {
                const auto c1 = cyber.step(c, act, a);
                const auto c2 = cyber.step(c, act, b);
                REQUIRE(c1.next_state == c2.next_state);
                REQUIRE(c1.observation == c2.observation);
                c = c1.next_state;
            }
            if (r1.done) {
                break;
            }
            s = r1.next_state;
        }
    }
}

TEST_CASE("derived seeds do not depend on how many siblings exist") {
    CHECK(derive_seed(9, {stream::kParticle, 3, 1}) == derive_seed(9, {stream::kParticle, 3, 1}));
    CHECK(derive_seed(9, {stream::kParticle, 3, 1}) != derive_seed(9, {stream::kParticle, 4, 1}));
    CHECK(derive_seed(9, {stream::kParticle, 3, 1}) != derive_seed(9, {stream::kBelief, 3, 1}));
}

TEST_CASE("belief validation") {
    CHECK_THROWS_AS(Belief{}.validate(), ContractViolation);
    Belief b{{{0.0}, {1.0}}, {0.7, 0.4}};
    CHECK_THROWS_AS(b.validate(), ContractViolation);
    b.weights = {0.5, 0.5};
    CHECK_NOTHROW(b.validate());
}
