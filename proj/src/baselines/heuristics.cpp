#include "sptree/baselines/heuristics.hpp"

namespace sptree::baselines {

ScriptedCyberPolicy::ScriptedCyberPolicy(std::shared_ptr<const env::CyberModel> model, double threshold)
    : model_(std::move(model)), threshold_(threshold) {
    if (!model_) {
        throw ContractViolation("null cyber model");
    }
    if (!(threshold_ > 0.0 && threshold_ <= 1.0)) {
        throw ContractViolation("cleaning threshold must be in (0, 1]");
    }
}

std::vector<double> ScriptedCyberPolicy::marginals(const Belief& belief) const {
    std::vector<double> p(model_->host_count(), 0.0);
    for (std::size_t h = 0; h < belief.size(); ++h) {
        for (std::size_t j = 0; j < p.size(); ++j) {
            if (model_->compromised(belief.hypotheses[h], j)) {
                p[j] += belief.weights[h];
            }
        }
    }
    return p;
}

std::vector<double> ScriptedCyberPolicy::scores(const Belief& belief) const {
    belief.validate();
    const auto& params = model_->params();
    std::vector<double> out(model_->action_count());
    for (std::size_t l = 0; l < params.n_lans; ++l) {
        out[model_->scan_action(l).index] = 1.0 - 0.05 * static_cast<double>(model_->lan_distance(l) - 1);
    }
    const auto p = marginals(belief);
    for (std::size_t j = 0; j < p.size(); ++j) {
        out[model_->clean_action(j).index] = p[j] / threshold_;
    }
    return out;
}

std::vector<double> ScriptedCyberPolicy::scores(const StateVector& state) const {
    return scores(Belief::point_mass(state));
}

LargestSusceptiblePolicy::LargestSusceptiblePolicy(std::shared_ptr<const env::SirdModel> model)
    : model_(std::move(model)) {
    if (!model_) {
        throw ContractViolation("null vaccine model");
    }
}

std::vector<double> LargestSusceptiblePolicy::scores(const StateVector& state) const {
    std::vector<double> out(model_->action_count());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = model_->vaccinated(state, i) ? -1.0 : model_->city(state, i).s;
    }
    return out;
}

LookaheadVaccinePolicy::LookaheadVaccinePolicy(std::shared_ptr<const env::SirdModel> model)
    : model_(std::move(model)), rollout_(model_) {}

std::vector<double> LookaheadVaccinePolicy::scores(const StateVector& state) const {
    // No noise is drawn, so the generator is never consulted.
    Rng unused(0);
    const double gamma = model_->discount();
    std::vector<double> out(model_->action_count());
    for (std::size_t a = 0; a < out.size(); ++a) {
        StepResult r = model_->advance(state, ActionId{a}, unused, false);
        double total = r.reward;
        double disc = gamma;
        StateVector s = std::move(r.next_state);
        bool done = r.done;
        while (!done) {
            r = model_->advance(s, argmax_action(rollout_.scores(s)), unused, false);
            total += disc * r.reward;
            disc *= gamma;
            s = std::move(r.next_state);
            done = r.done;
        }
        out[a] = total;
    }
    return out;
}

}  // namespace sptree::baselines
