#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "sptree/enumerable.hpp"
#include "sptree/mdp.hpp"

namespace sptree::env {

struct Cell {
    int x = 0;
    int y = 0;

    friend constexpr bool operator==(Cell, Cell) = default;
    friend constexpr auto operator<=>(Cell, Cell) = default;
};

/// Grid navigation task. Actions come in groups of four (N, E, S, W); action
/// a moves a / 4 + 1 cells in direction a % 4. North is +y.
struct GridWorldParams {
    int width = 10;
    int height = 10;
    std::size_t n_actions = 4;
    double p_success = 0.9;
    Cell start{0, 0};
    std::vector<Cell> goals{{9, 9}};
    std::vector<Cell> traps{{3, 3}, {5, 5}, {7, 7}};
    double step_cost = -1.0;
    double goal_reward = 10.0;
    double trap_penalty = -5.0;
    std::size_t max_steps = 100;
    double discount = 0.95;

    void validate() const;

    friend bool operator==(const GridWorldParams&, const GridWorldParams&) = default;
};

/// State layout: (x, y, steps taken).
class GridWorld final : public GenerativeModel, public EnumerableMdp {
public:
    explicit GridWorld(GridWorldParams params);

    const GridWorldParams& params() const noexcept { return params_; }

    // GenerativeModel
    std::size_t action_count() const override { return params_.n_actions; }
    std::size_t state_dimension() const override { return 3; }
    double discount() const override { return params_.discount; }
    std::optional<std::size_t> horizon() const override { return params_.max_steps; }
    StepResult step(const StateVector& state, ActionId action, Rng& rng) const override;
    bool is_terminal(const StateVector& state) const override;
    StateVector initial_state(Rng& rng) const override;
    const EnumerableMdp* enumerable() const override { return this; }
    std::string action_label(ActionId action) const override;
    std::string describe_particles(std::span<const Particle> particles) const override;

    // EnumerableMdp: positions only; the step limit is not part of the tabular view.
    std::size_t state_count() const override;
    bool is_terminal(std::size_t state) const override;
    std::vector<Transition> transitions(std::size_t state, ActionId action) const override;
    std::size_t index_of(const StateVector& state) const override;
    StateVector state_of(std::size_t index) const override;

    /// Destination of a move, clipped to the grid.
    Cell move(Cell from, ActionId action) const noexcept;
    bool is_goal(Cell c) const noexcept;
    bool is_trap(Cell c) const noexcept;
    /// Reward for landing in `c`, and whether that ends the episode.
    std::pair<double, bool> landing(Cell c) const noexcept;

    static StateVector encode(Cell c, std::size_t t) {
        return {static_cast<double>(c.x), static_cast<double>(c.y), static_cast<double>(t)};
    }
    static Cell cell_of(const StateVector& s) { return Cell{static_cast<int>(s[0]), static_cast<int>(s[1])}; }

private:
    GridWorldParams params_;
};

}  // namespace sptree::env
