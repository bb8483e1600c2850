#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sptree/mdp.hpp"

namespace sptree::env {

/// Multi-city stochastic SIRD model where each decision starts a vaccination
/// program in one city.
struct SirdParams {
    std::size_t n_cities = 8;
    double beta = 0.25;       // infection rate
    double gamma_rec = 0.1;   // recovery rate
    double mu = 0.02;         // death rate
    double alpha_vax = 0.3;   // vaccination rate once a program is running
    double weight_decay = 0.3;  // w_ij = weight_decay^|i-j|
    double noise_std = 0.005;
    double reward_infected = -1.0;  // a
    double reward_dead = -10.0;     // b
    std::size_t programs_per_episode = 5;
    std::size_t max_decisions = 20;
    double initial_max_infected = 0.1;
    double hotspot_infected = 0.25;
    double quiescence_threshold = 0.01;
    std::size_t max_runout_steps = 200;
    double discount = 1.0;
    std::vector<std::string> city_names;  // optional; defaults to "City 1".."City n"

    void validate() const;
    /// Explicit coupling matrix (row-major n x n).
    std::vector<double> weights() const;

    friend bool operator==(const SirdParams&, const SirdParams&) = default;
};

struct CityState {
    double s = 1.0;
    double i = 0.0;
    double r = 0.0;
    double d = 0.0;
};

struct CityIncrements {
    double ds = 0.0;
    double di = 0.0;
    double dr = 0.0;
    double dd = 0.0;
};

/// One evaluation of the four difference equations for a city with
/// effective exposure `exposure` and noise draws for S and I.
CityIncrements sird_increments(const CityState& city, double exposure, double alpha, const SirdParams& params,
                               double eps_s = 0.0, double eps_i = 0.0);

/// State layout: for city i, entries 4i..4i+3 hold (S, I, R, D); then one
/// vaccination flag per city; then programs started; then decisions taken.
class SirdModel final : public GenerativeModel {
public:
    explicit SirdModel(SirdParams params);

    const SirdParams& params() const noexcept { return params_; }

    std::size_t action_count() const override { return params_.n_cities; }
    std::size_t state_dimension() const override { return 5 * params_.n_cities + 2; }
    double discount() const override { return params_.discount; }
    std::optional<std::size_t> horizon() const override { return params_.max_decisions; }
    StepResult step(const StateVector& state, ActionId action, Rng& rng) const override;
    /// step() with the Gaussian noise optionally switched off.
    StepResult advance(const StateVector& state, ActionId action, Rng& rng, bool noise) const;
    bool is_terminal(const StateVector& state) const override;
    StateVector initial_state(Rng& rng) const override;
    std::string action_label(ActionId action) const override;
    std::string describe_particles(std::span<const Particle> particles) const override;

    CityState city(const StateVector& state, std::size_t i) const;
    bool vaccinated(const StateVector& state, std::size_t i) const;
    std::size_t programs_started(const StateVector& state) const;

    /// Advances every city one tick in place; returns the tick's reward.
    /// noise=false skips the Gaussian draws (used for planning lookahead).
    double tick(StateVector& state, Rng& rng, bool noise = true) const;
    /// Runs ticks until every city has S or I below the quiescence threshold.
    double run_to_quiescence(StateVector& state, Rng& rng, bool noise = true) const;
    bool quiescent(const StateVector& state) const;

private:
    SirdParams params_;
    std::vector<double> weights_;
};

}  // namespace sptree::env
