#pragma once

// Hand-written baseline policies: the scripted cyber defender and two
// reference policies for the vaccine planner.

#include <memory>
#include <vector>

#include "sptree/env/cyber.hpp"
#include "sptree/env/sird.hpp"
#include "sptree/mdp.hpp"

namespace sptree::baselines {

/// Cleans the most suspicious host once its compromise probability exceeds
/// `threshold`; otherwise scans the LAN nearest the data server.
///
/// Scores: scanning LAN l gets 1 - 0.05 * (hops(l) - 1); cleaning host j gets
/// p_j / threshold, where p_j is the belief marginal of host j being compromised.
class ScriptedCyberPolicy final : public BaselinePolicy {
public:
    explicit ScriptedCyberPolicy(std::shared_ptr<const env::CyberModel> model, double threshold = 0.5);

    ScoreKind kind() const override { return ScoreKind::ActionValues; }
    std::size_t action_count() const override { return model_->action_count(); }
    std::size_t state_dimension() const override { return model_->state_dimension(); }
    std::vector<double> scores(const StateVector& state) const override;
    std::vector<double> scores(const Belief& belief) const override;
    using BaselinePolicy::scores;

    /// Per-host compromise probability under the belief.
    std::vector<double> marginals(const Belief& belief) const;

private:
    std::shared_ptr<const env::CyberModel> model_;
    double threshold_;
};

/// Vaccinates the unvaccinated city with the largest susceptible fraction.
/// Scores are S_i for open cities and -1 for cities already vaccinated.
class LargestSusceptiblePolicy final : public BaselinePolicy {
public:
    explicit LargestSusceptiblePolicy(std::shared_ptr<const env::SirdModel> model);

    ScoreKind kind() const override { return ScoreKind::ActionValues; }
    std::size_t action_count() const override { return model_->action_count(); }
    std::size_t state_dimension() const override { return model_->state_dimension(); }
    std::vector<double> scores(const StateVector& state) const override;
    using BaselinePolicy::scores;

private:
    std::shared_ptr<const env::SirdModel> model_;
};

/// One-step lookahead on the noiseless dynamics: the score of city a is the
/// return of vaccinating a now and then following LargestSusceptiblePolicy
/// to the end of the episode.
class LookaheadVaccinePolicy final : public BaselinePolicy {
public:
    explicit LookaheadVaccinePolicy(std::shared_ptr<const env::SirdModel> model);

    ScoreKind kind() const override { return ScoreKind::ActionValues; }
    std::size_t action_count() const override { return model_->action_count(); }
    std::size_t state_dimension() const override { return model_->state_dimension(); }
    std::vector<double> scores(const StateVector& state) const override;
    using BaselinePolicy::scores;

private:
    std::shared_ptr<const env::SirdModel> model_;
    LargestSusceptiblePolicy rollout_;
};

}  // namespace sptree::baselines
