#pragma once

// Environment and policy contracts shared by the tree builder, the controller,
// the baselines and the experiment harness.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sptree/rng.hpp"

namespace sptree {

/// Raised when a caller breaks a documented precondition.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Index into a finite action space.
struct ActionId {
    std::size_t index = 0;

    friend constexpr bool operator==(ActionId, ActionId) = default;
    friend constexpr auto operator<=>(ActionId, ActionId) = default;
};

using StateVector = std::vector<double>;
using Observation = std::vector<double>;

/// Weighted particle approximation of a belief over hidden states.
struct Belief {
    std::vector<StateVector> hypotheses;
    std::vector<double> weights;

    std::size_t size() const noexcept { return hypotheses.size(); }

    /// Point mass on one state.
    static Belief point_mass(StateVector state);
    /// Equal weights over the given hypotheses.
    static Belief uniform(std::vector<StateVector> hypotheses);

    /// Throws ContractViolation if empty, mismatched, negative or not normalized.
    void validate() const;

    friend bool operator==(const Belief&, const Belief&) = default;
};

/// Query point handed to a baseline policy: a state (MDP) or a belief (POMDP).
using Query = std::variant<StateVector, Belief>;

/// One simulated trajectory head.
struct Particle {
    StateVector state;
    double reward = 0.0;  // reward received entering this state
    std::optional<Observation> observation;
    std::shared_ptr<const Belief> belief;  // set iff the model is partially observable
    double cumulative_discount = 1.0;      // discount^depth
    std::uint64_t trajectory = 0;          // stable id selecting this trajectory's random substream
};

struct StepResult {
    StateVector next_state;
    std::optional<Observation> observation;
    double reward = 0.0;
    bool done = false;
};

class EnumerableMdp;

/// Generative simulation contract. Implementations are stateless transition
/// functions: all randomness comes from the Rng passed in.
class GenerativeModel {
public:
    virtual ~GenerativeModel() = default;

    virtual std::size_t action_count() const = 0;
    virtual std::size_t state_dimension() const = 0;
    virtual double discount() const = 0;
    virtual std::optional<std::size_t> horizon() const { return std::nullopt; }
    virtual bool partially_observable() const { return false; }

    virtual StepResult step(const StateVector& state, ActionId action, Rng& rng) const = 0;
    /// True when `state` must not be stepped.
    virtual bool is_terminal(const StateVector&) const { return false; }

    /// Initial state for fully observable models (may be random).
    virtual StateVector initial_state(Rng& rng) const = 0;
    /// Initial belief for partially observable models.
    virtual Belief initial_belief() const;

    /// Z(o | s, a, s'). Only partially observable models need to override this.
    virtual double observation_likelihood(const StateVector& state, ActionId action, const StateVector& next_state,
                                          const Observation& observation) const;

    /// Exact-transition view, when the model supports enumeration.
    virtual const EnumerableMdp* enumerable() const { return nullptr; }

    virtual std::string action_label(ActionId action) const { return "a" + std::to_string(action.index); }
    /// Compact, environment-specific description of a set of particles.
    virtual std::string describe_particles(std::span<const Particle> particles) const;

    void check_action(ActionId action) const;
    void check_state(const StateVector& state) const;
};

enum class ScoreKind { ActionValues, Probabilities };

/// Baseline policy contract: per-action scores for a query point.
class BaselinePolicy {
public:
    virtual ~BaselinePolicy() = default;

    virtual ScoreKind kind() const = 0;
    virtual std::size_t action_count() const = 0;
    virtual std::size_t state_dimension() const = 0;

    virtual std::vector<double> scores(const StateVector& state) const = 0;
    /// Policies over beliefs override this; the default rejects beliefs.
    virtual std::vector<double> scores(const Belief& belief) const;

    std::vector<double> scores(const Query& query) const;
    /// Scores at a particle: the belief when one is carried, otherwise the state.
    std::vector<double> scores(const Particle& particle) const;
};

/// Index of the maximum score; ties go to the lowest index.
ActionId argmax_action(std::span<const double> scores);

/// Greedy action of the policy at a query point.
ActionId greedy_action(const BaselinePolicy& policy, const Query& query);

/// n particles for the given initial query. MDP: copies of the state.
/// POMDP: states drawn from the belief, each carrying the belief.
std::vector<Particle> sample_initial_particles(const GenerativeModel& model, const Query& initial, std::size_t n,
                                               std::uint64_t seed);
/// As above, with the initial query taken from the model itself.
std::vector<Particle> sample_initial_particles(const GenerativeModel& model, std::size_t n, std::uint64_t seed);

/// The model's initial query for a seed: initial_state for MDPs, initial_belief for POMDPs.
Query initial_query(const GenerativeModel& model, std::uint64_t seed);

struct BeliefUpdate {
    Belief belief;
    bool degenerate = false;  // every hypothesis had zero likelihood
};

/// Weighted particle-filter update: propagate, reweight by Z, normalize,
/// resample when the effective sample size falls below half the hypothesis count.
/// Hypotheses that terminate get zero weight: the caller is tracking an episode that continues.
BeliefUpdate update_belief(const GenerativeModel& model, const Belief& belief, ActionId action,
                           const Observation& observation, Rng& rng);

double effective_sample_size(std::span<const double> weights);

}  // namespace sptree
