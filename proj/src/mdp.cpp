#include "sptree/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace sptree {

Belief Belief::point_mass(StateVector state) {
    Belief b;
    b.hypotheses.push_back(std::move(state));
    b.weights.push_back(1.0);
    return b;
}

Belief Belief::uniform(std::vector<StateVector> hypotheses) {
    if (hypotheses.empty()) {
        throw ContractViolation("belief needs at least one hypothesis");
    }
    Belief b;
    const double w = 1.0 / static_cast<double>(hypotheses.size());
    b.weights.assign(hypotheses.size(), w);
    b.hypotheses = std::move(hypotheses);
    return b;
}

void Belief::validate() const {
    if (hypotheses.empty()) {
        throw ContractViolation("belief needs at least one hypothesis");
    }
    if (hypotheses.size() != weights.size()) {
        throw ContractViolation("belief hypothesis/weight count mismatch");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw ContractViolation("belief weights must be finite and non-negative");
        }
        total += w;
    }
    if (std::fabs(total - 1.0) > 1e-9) {
        throw ContractViolation("belief weights must sum to 1");
    }
}

Belief GenerativeModel::initial_belief() const {
    throw ContractViolation("model is fully observable; it has no initial belief");
}

double GenerativeModel::observation_likelihood(const StateVector&, ActionId, const StateVector&,
                                               const Observation&) const {
    return 1.0;
}

std::string GenerativeModel::describe_particles(std::span<const Particle> particles) const {
    if (particles.empty()) {
        return {};
    }
    // Modal state.
    std::map<StateVector, std::size_t> counts;
    for (const auto& p : particles) {
        ++counts[p.state];
    }
    auto best = std::max_element(counts.begin(), counts.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; });
    std::ostringstream out;
    out << '(';
    for (std::size_t i = 0; i < best->first.size(); ++i) {
        out << (i ? ", " : "") << best->first[i];
    }
    out << ')';
    return out.str();
}

void GenerativeModel::check_action(ActionId action) const {
    if (action.index >= action_count()) {
        throw ContractViolation("action " + std::to_string(action.index) + " out of range (action count " +
                                std::to_string(action_count()) + ")");
    }
}

void GenerativeModel::check_state(const StateVector& state) const {
    if (state.size() != state_dimension()) {
        throw ContractViolation("state has dimension " + std::to_string(state.size()) + ", expected " +
                                std::to_string(state_dimension()));
    }
}

std::vector<double> BaselinePolicy::scores(const Belief&) const {
    throw ContractViolation("policy does not accept beliefs");
}

std::vector<double> BaselinePolicy::scores(const Query& query) const {
    return std::visit(
        [this](const auto& q) {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, StateVector>) {
                if (q.size() != state_dimension()) {
                    throw ContractViolation("query has dimension " + std::to_string(q.size()) + ", policy expects " +
                                            std::to_string(state_dimension()));
                }
            } else {
                for (const auto& h : q.hypotheses) {
                    if (h.size() != state_dimension()) {
                        throw ContractViolation("belief hypothesis dimension mismatch");
                    }
                }
            }
            return scores(q);
        },
        query);
}

std::vector<double> BaselinePolicy::scores(const Particle& particle) const {
    if (particle.belief) {
        return scores(*particle.belief);
    }
    return scores(particle.state);
}

ActionId argmax_action(std::span<const double> scores) {
    if (scores.empty()) {
        throw ContractViolation("empty score vector");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) {
            best = i;
        }
    }
    return ActionId{best};
}

ActionId greedy_action(const BaselinePolicy& policy, const Query& query) {
    const auto s = policy.scores(query);
    if (s.size() != policy.action_count()) {
        throw ContractViolation("policy returned " + std::to_string(s.size()) + " scores for " +
                                std::to_string(policy.action_count()) + " actions");
    }
    return argmax_action(s);
}

namespace {

std::size_t sample_index(std::span<const double> weights, double u) {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) {
            return i;
        }
    }
    return weights.size() - 1;
}

}  // namespace

std::vector<Particle> sample_initial_particles(const GenerativeModel& model, const Query& initial, std::size_t n,
                                               std::uint64_t seed) {
    if (n == 0) {
        throw ContractViolation("particle count must be positive");
    }
    std::vector<Particle> particles;
    particles.reserve(n);
    if (const auto* state = std::get_if<StateVector>(&initial)) {
        if (model.partially_observable()) {
            throw ContractViolation("partially observable model needs an initial belief");
        }
        model.check_state(*state);
        for (std::size_t i = 0; i < n; ++i) {
            Particle p;
            p.state = *state;
            p.trajectory = i;
            particles.push_back(std::move(p));
        }
        return particles;
    }
    const auto& belief = std::get<Belief>(initial);
    if (!model.partially_observable()) {
        throw ContractViolation("fully observable model needs an initial state");
    }
    belief.validate();
    auto shared = std::make_shared<const Belief>(belief);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, {stream::kInitial, i}));
        Particle p;
        p.state = belief.hypotheses[sample_index(belief.weights, rng.uniform())];
        p.belief = shared;
        p.trajectory = i;
        particles.push_back(std::move(p));
    }
    return particles;
}

Query initial_query(const GenerativeModel& model, std::uint64_t seed) {
    if (model.partially_observable()) {
        return model.initial_belief();
    }
    Rng rng(derive_seed(seed, {stream::kInitial}));
    return model.initial_state(rng);
}

std::vector<Particle> sample_initial_particles(const GenerativeModel& model, std::size_t n, std::uint64_t seed) {
    return sample_initial_particles(model, initial_query(model, seed), n, seed);
}

double effective_sample_size(std::span<const double> weights) {
    double sq = 0.0;
    for (double w : weights) {
        sq += w * w;
    }
    return sq > 0.0 ? 1.0 / sq : 0.0;
}

BeliefUpdate update_belief(const GenerativeModel& model, const Belief& belief, ActionId action,
                           const Observation& observation, Rng& rng) {
    if (belief.hypotheses.empty()) {
        throw ContractViolation("belief needs at least one hypothesis");
    }
    model.check_action(action);
    const std::size_t m = belief.size();

    BeliefUpdate out;
    out.belief.hypotheses.reserve(m);
    out.belief.weights.reserve(m);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& s = belief.hypotheses[i];
        // The update is only made for episodes that go on, so hypotheses that
        // end here are inconsistent with the observation stream.
        if (model.is_terminal(s)) {
            out.belief.hypotheses.push_back(s);
            out.belief.weights.push_back(0.0);
            continue;
        }
        StepResult r = model.step(s, action, rng);
        const double w =
            r.done ? 0.0 : belief.weights[i] * model.observation_likelihood(s, action, r.next_state, observation);
        total += w;
        out.belief.hypotheses.push_back(std::move(r.next_state));
        out.belief.weights.push_back(w);
    }

    if (!(total > 0.0)) {
        out.degenerate = true;
        std::fill(out.belief.weights.begin(), out.belief.weights.end(), 1.0 / static_cast<double>(m));
        return out;
    }
    for (double& w : out.belief.weights) {
        w /= total;
    }

    if (effective_sample_size(out.belief.weights) < 0.5 * static_cast<double>(m)) {
        // Systematic resampling back to m equally weighted hypotheses.
        std::vector<StateVector> resampled;
        resampled.reserve(m);
        const double step = 1.0 / static_cast<double>(m);
        double u = rng.uniform() * step;
        double acc = out.belief.weights[0];
        std::size_t j = 0;
        for (std::size_t i = 0; i < m; ++i) {
            while (u >= acc && j + 1 < m) {
                ++j;
                acc += out.belief.weights[j];
            }
            resampled.push_back(out.belief.hypotheses[j]);
            u += step;
        }
        out.belief.hypotheses = std::move(resampled);
        out.belief.weights.assign(m, step);
    }
    // Guard against drift from repeated division.
    const double sum = std::accumulate(out.belief.weights.begin(), out.belief.weights.end(), 0.0);
    for (double& w : out.belief.weights) {
        w /= sum;
    }
    return out;
}

}  // namespace sptree
