#include "sptree/env/sird.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace sptree::env {

void SirdParams::validate() const {
    if (n_cities == 0) {
        throw ContractViolation("n_cities must be positive");
    }
    for (double rate : {beta, gamma_rec, mu, alpha_vax, weight_decay, noise_std}) {
        if (!(rate >= 0.0) || !std::isfinite(rate)) {
            throw ContractViolation("SIRD rates must be finite and non-negative");
        }
    }
    if (alpha_vax > 1.0 || gamma_rec + mu > 1.0) {
        throw ContractViolation("SIRD outflow rates must not exceed 1 per step");
    }
    if (weight_decay > 1.0) {
        throw ContractViolation("weight_decay must be at most 1 so weights decrease with distance");
    }
    if (programs_per_episode == 0 || programs_per_episode > n_cities) {
        throw ContractViolation("programs_per_episode must be in [1, n_cities]");
    }
    if (max_decisions < programs_per_episode) {
        throw ContractViolation("max_decisions must allow every program to start");
    }
    if (!(initial_max_infected >= 0.0 && initial_max_infected <= 1.0) ||
        !(hotspot_infected >= 0.0 && hotspot_infected <= 1.0)) {
        throw ContractViolation("initial infection fractions must be in [0, 1]");
    }
    if (!city_names.empty() && city_names.size() != n_cities) {
        throw ContractViolation("city_names must name every city");
    }
    if (!(discount > 0.0 && discount <= 1.0)) {
        throw ContractViolation("discount must be in (0, 1]");
    }
}

std::vector<double> SirdParams::weights() const {
    std::vector<double> w(n_cities * n_cities);
    for (std::size_t i = 0; i < n_cities; ++i) {
        for (std::size_t j = 0; j < n_cities; ++j) {
            const auto gap = static_cast<double>(i > j ? i - j : j - i);
            w[i * n_cities + j] = std::pow(weight_decay, gap);
        }
    }
    return w;
}

CityIncrements sird_increments(const CityState& c, double exposure, double alpha, const SirdParams& p, double eps_s,
                               double eps_i) {
    const double infections = p.beta * exposure * c.s;
    CityIncrements d;
    d.ds = -infections - alpha * c.s + eps_s;
    d.di = infections - p.gamma_rec * c.i - p.mu * c.i + eps_i;
    d.dr = p.gamma_rec * c.i + alpha * c.s;
    d.dd = p.mu * c.i;
    return d;
}

SirdModel::SirdModel(SirdParams params) : params_(std::move(params)) {
    params_.validate();
    weights_ = params_.weights();
}

CityState SirdModel::city(const StateVector& state, std::size_t i) const {
    return CityState{state[4 * i], state[4 * i + 1], state[4 * i + 2], state[4 * i + 3]};
}

bool SirdModel::vaccinated(const StateVector& state, std::size_t i) const {
    return state[4 * params_.n_cities + i] > 0.5;
}

std::size_t SirdModel::programs_started(const StateVector& state) const {
    return static_cast<std::size_t>(state[5 * params_.n_cities]);
}

double SirdModel::tick(StateVector& state, Rng& rng, bool noise) const {
    const std::size_t n = params_.n_cities;
    std::vector<CityState> before(n);
    for (std::size_t i = 0; i < n; ++i) {
        before[i] = city(state, i);
    }
    double reward = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double exposure = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            exposure += weights_[i * n + j] * before[j].i;
        }
        const bool draw = noise && params_.noise_std > 0.0;
        const double eps_s = draw ? params_.noise_std * rng.normal() : 0.0;
        const double eps_i = draw ? params_.noise_std * rng.normal() : 0.0;
        const double alpha = vaccinated(state, i) ? params_.alpha_vax : 0.0;
        const CityIncrements d = sird_increments(before[i], exposure, alpha, params_, eps_s, eps_i);

        CityState next{before[i].s + d.ds, before[i].i + d.di, before[i].r + d.dr, before[i].d + d.dd};
        // Noise only enters S and I, so only those absorb the clamp and renormalization;
        // R and D never decrease.
        next.s = std::clamp(next.s, 0.0, 1.0);
        next.i = std::clamp(next.i, 0.0, 1.0);
        next.r = std::clamp(next.r, 0.0, 1.0);
        next.d = std::clamp(next.d, 0.0, 1.0);
        const double target = std::max(0.0, 1.0 - next.r - next.d);
        const double live = next.s + next.i;
        if (live > 0.0) {
            const double scale = target / live;
            next.s *= scale;
            next.i *= scale;
        } else {
            next.s = target;
        }

        reward += params_.reward_infected * (next.i - before[i].i) + params_.reward_dead * (next.d - before[i].d);
        state[4 * i] = next.s;
        state[4 * i + 1] = next.i;
        state[4 * i + 2] = next.r;
        state[4 * i + 3] = next.d;
    }
    return reward;
}

bool SirdModel::quiescent(const StateVector& state) const {
    for (std::size_t i = 0; i < params_.n_cities; ++i) {
        const CityState c = city(state, i);
        if (c.s >= params_.quiescence_threshold && c.i >= params_.quiescence_threshold) {
            return false;
        }
    }
    return true;
}

double SirdModel::run_to_quiescence(StateVector& state, Rng& rng, bool noise) const {
    double total = 0.0;
    for (std::size_t t = 0; t < params_.max_runout_steps && !quiescent(state); ++t) {
        total += tick(state, rng, noise);
    }
    return total;
}

StepResult SirdModel::step(const StateVector& state, ActionId action, Rng& rng) const {
    return advance(state, action, rng, true);
}

StepResult SirdModel::advance(const StateVector& state, ActionId action, Rng& rng, bool noise) const {
    check_state(state);
    check_action(action);
    if (is_terminal(state)) {
        throw ContractViolation("cannot step a finished vaccine episode");
    }
    const std::size_t n = params_.n_cities;
    StepResult r;
    r.next_state = state;
    auto& s = r.next_state;
    if (!vaccinated(s, action.index)) {
        s[4 * n + action.index] = 1.0;
        s[5 * n] += 1.0;
    }
    s[5 * n + 1] += 1.0;

    r.reward = tick(s, rng, noise);
    if (is_terminal(s)) {
        // Run-out rewards are accumulated undiscounted into the final step.
        r.reward += run_to_quiescence(s, rng, noise);
        r.done = true;
    }
    return r;
}

bool SirdModel::is_terminal(const StateVector& state) const {
    const std::size_t n = params_.n_cities;
    return programs_started(state) >= params_.programs_per_episode ||
           static_cast<std::size_t>(state[5 * n + 1]) >= params_.max_decisions;
}

StateVector SirdModel::initial_state(Rng& rng) const {
    const std::size_t n = params_.n_cities;
    StateVector s(5 * n + 2, 0.0);
    const auto hotspot = static_cast<std::size_t>(rng.below(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double draw = rng.uniform() * params_.initial_max_infected;
        const double infected = i == hotspot ? params_.hotspot_infected : draw;
        s[4 * i] = 1.0 - infected;
        s[4 * i + 1] = infected;
    }
    return s;
}

std::string SirdModel::action_label(ActionId action) const {
    if (!params_.city_names.empty()) {
        return params_.city_names.at(action.index);
    }
    return "City " + std::to_string(action.index + 1);
}

std::string SirdModel::describe_particles(std::span<const Particle> particles) const {
    if (particles.empty()) {
        return {};
    }
    const std::size_t n = params_.n_cities;
    std::vector<double> mean_s(n, 0.0);
    std::vector<double> mean_i(n, 0.0);
    for (const auto& p : particles) {
        for (std::size_t i = 0; i < n; ++i) {
            mean_s[i] += p.state[4 * i];
            mean_i[i] += p.state[4 * i + 1];
        }
    }
    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    const auto count = static_cast<double>(particles.size());
    out << "S=[";
    for (std::size_t i = 0; i < n; ++i) {
        out << (i ? " " : "") << mean_s[i] / count;
    }
    out << "] I=[";
    for (std::size_t i = 0; i < n; ++i) {
        out << (i ? " " : "") << mean_i[i] / count;
    }
    out << ']';
    return out.str();
}

}  // namespace sptree::env
