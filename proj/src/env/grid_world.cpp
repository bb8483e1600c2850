#include "sptree/env/grid_world.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace sptree::env {

namespace {

constexpr int kDx[4] = {0, 1, 0, -1};
constexpr int kDy[4] = {1, 0, -1, 0};
constexpr const char* kDirNames[4] = {"N", "E", "S", "W"};

bool contains(const std::vector<Cell>& cells, Cell c) {
    return std::find(cells.begin(), cells.end(), c) != cells.end();
}

}  // namespace

void GridWorldParams::validate() const {
    if (width <= 0 || height <= 0) {
        throw ContractViolation("grid dimensions must be positive");
    }
    if (n_actions < 4 || n_actions % 4 != 0) {
        throw ContractViolation("grid action count must be a positive multiple of 4");
    }
    if (!(p_success > 0.0 && p_success <= 1.0)) {
        throw ContractViolation("p_success must be in (0, 1]");
    }
    if (max_steps == 0) {
        throw ContractViolation("max_steps must be positive");
    }
    if (!(discount > 0.0 && discount <= 1.0)) {
        throw ContractViolation("discount must be in (0, 1]");
    }
    auto in_bounds = [&](Cell c) { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; };
    if (!in_bounds(start)) {
        throw ContractViolation("start cell out of bounds");
    }
    for (Cell g : goals) {
        if (!in_bounds(g)) {
            throw ContractViolation("goal cell out of bounds");
        }
        if (contains(traps, g)) {
            throw ContractViolation("a cell cannot be both goal and trap");
        }
    }
    for (Cell t : traps) {
        if (!in_bounds(t)) {
            throw ContractViolation("trap cell out of bounds");
        }
    }
}

GridWorld::GridWorld(GridWorldParams params) : params_(std::move(params)) { params_.validate(); }

Cell GridWorld::move(Cell from, ActionId action) const noexcept {
    const std::size_t dir = action.index % 4;
    const int dist = static_cast<int>(action.index / 4) + 1;
    Cell to{from.x + kDx[dir] * dist, from.y + kDy[dir] * dist};
    to.x = std::clamp(to.x, 0, params_.width - 1);
    to.y = std::clamp(to.y, 0, params_.height - 1);
    return to;
}

bool GridWorld::is_goal(Cell c) const noexcept { return contains(params_.goals, c); }
bool GridWorld::is_trap(Cell c) const noexcept { return contains(params_.traps, c); }

std::pair<double, bool> GridWorld::landing(Cell c) const noexcept {
    double r = params_.step_cost;
    if (is_goal(c)) {
        return {r + params_.goal_reward, true};
    }
    if (is_trap(c)) {
        r += params_.trap_penalty;
    }
    return {r, false};
}

StepResult GridWorld::step(const StateVector& state, ActionId action, Rng& rng) const {
    check_state(state);
    check_action(action);
    if (is_terminal(state)) {
        throw ContractViolation("cannot step a terminal grid state");
    }
    // Both draws are always consumed so paired episodes share slip events.
    const bool slip = !rng.bernoulli(params_.p_success);
    const ActionId random_action{static_cast<std::size_t>(rng.below(params_.n_actions))};
    const Cell to = move(cell_of(state), slip ? random_action : action);
    const auto t = static_cast<std::size_t>(state[2]) + 1;

    auto [reward, done] = landing(to);
    StepResult r;
    r.next_state = encode(to, t);
    r.reward = reward;
    r.done = done || t >= params_.max_steps;
    return r;
}

bool GridWorld::is_terminal(const StateVector& state) const {
    return is_goal(cell_of(state)) || static_cast<std::size_t>(state[2]) >= params_.max_steps;
}

StateVector GridWorld::initial_state(Rng&) const { return encode(params_.start, 0); }

std::string GridWorld::action_label(ActionId action) const {
    std::string label = kDirNames[action.index % 4];
    if (params_.n_actions > 4) {
        label += std::to_string(action.index / 4 + 1);
    }
    return label;
}

std::string GridWorld::describe_particles(std::span<const Particle> particles) const {
    if (particles.empty()) {
        return {};
    }
    std::map<Cell, std::size_t> counts;
    for (const auto& p : particles) {
        ++counts[cell_of(p.state)];
    }
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it) {
        if (it->second > best->second) {
            best = it;
        }
    }
    std::ostringstream out;
    out << '(' << best->first.x << ", " << best->first.y << ')';
    return out.str();
}

std::size_t GridWorld::state_count() const {
    return static_cast<std::size_t>(params_.width) * static_cast<std::size_t>(params_.height);
}

bool GridWorld::is_terminal(std::size_t state) const { return is_goal(cell_of(state_of(state))); }

std::vector<Transition> GridWorld::transitions(std::size_t state, ActionId action) const {
    check_action(action);
    const Cell from = cell_of(state_of(state));
    std::map<std::size_t, double> mass;
    mass[index_of(encode(move(from, action), 0))] += params_.p_success;
    const double slip = (1.0 - params_.p_success) / static_cast<double>(params_.n_actions);
    if (slip > 0.0) {
        for (std::size_t a = 0; a < params_.n_actions; ++a) {
            mass[index_of(encode(move(from, ActionId{a}), 0))] += slip;
        }
    }
    std::vector<Transition> out;
    out.reserve(mass.size());
    for (const auto& [next, p] : mass) {
        auto [reward, terminal] = landing(cell_of(state_of(next)));
        out.push_back(Transition{p, next, reward, terminal});
    }
    return out;
}

std::size_t GridWorld::index_of(const StateVector& state) const {
    const Cell c = cell_of(state);
    if (c.x < 0 || c.y < 0 || c.x >= params_.width || c.y >= params_.height) {
        throw ContractViolation("grid state out of bounds");
    }
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(params_.width) + static_cast<std::size_t>(c.x);
}

StateVector GridWorld::state_of(std::size_t index) const {
    const auto w = static_cast<std::size_t>(params_.width);
    return encode(Cell{static_cast<int>(index % w), static_cast<int>(index / w)}, 0);
}

}  // namespace sptree::env
