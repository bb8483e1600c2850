#pragma once

#include <cstddef>
#include <vector>

#include "sptree/mdp.hpp"

namespace sptree {

struct Transition {
    double probability = 0.0;
    std::size_t next = 0;
    double reward = 0.0;
    bool terminal = false;
};

/// Exact tabular view of a finite MDP, for dynamic programming baselines.
class EnumerableMdp {
public:
    virtual ~EnumerableMdp() = default;

    virtual std::size_t state_count() const = 0;
    virtual std::size_t action_count() const = 0;
    virtual bool is_terminal(std::size_t state) const = 0;
    /// Outcome distribution of taking `action` in `state`. Probabilities sum to 1.
    virtual std::vector<Transition> transitions(std::size_t state, ActionId action) const = 0;

    virtual std::size_t index_of(const StateVector& state) const = 0;
    virtual StateVector state_of(std::size_t index) const = 0;
};

}  // namespace sptree
