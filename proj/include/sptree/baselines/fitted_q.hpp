#pragma once

// Fitted Q-iteration with a small two-layer approximator, a replay buffer,
// a periodically refreshed target copy, n-step returns and double-Q targets.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "sptree/mdp.hpp"

namespace sptree::baselines {

class TrainingFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Regression batch: one column of `inputs` per sample; the loss only looks at
/// output `actions[b]` of sample b.
struct RegressionBatch {
    Eigen::MatrixXd inputs;
    std::vector<std::size_t> actions;
    Eigen::VectorXd targets;
};

/// in -> tanh(hidden) -> linear(out).
class Mlp {
public:
    Mlp() = default;
    Mlp(std::size_t inputs, std::size_t hidden, std::size_t outputs, Rng& rng);

    std::size_t input_size() const noexcept { return static_cast<std::size_t>(w1_.cols()); }
    std::size_t output_size() const noexcept { return static_cast<std::size_t>(w2_.rows()); }
    std::size_t parameter_count() const noexcept;

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

    /// 0.5 * mean squared error on the selected outputs.
    double loss(const RegressionBatch& batch) const;
    /// Loss, with the analytic gradient written to `grad` (parameters() layout).
    double loss_and_gradient(const RegressionBatch& batch, Eigen::VectorXd& grad) const;

    /// Flat parameter vector: W1 (column-major), b1, W2 (column-major), b2.
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& flat);

    friend bool operator==(const Mlp& a, const Mlp& b) { return a.parameters() == b.parameters(); }

private:
    Eigen::MatrixXd w1_;
    Eigen::VectorXd b1_;
    Eigen::MatrixXd w2_;
    Eigen::VectorXd b2_;
};

struct FittedQConfig {
    std::size_t iterations = 20000;  // environment steps, one gradient step each after warm-up
    std::size_t batch_size = 32;
    std::size_t replay_capacity = 20000;
    std::size_t target_refresh = 500;
    std::size_t n_step = 3;
    std::size_t hidden = 64;
    std::size_t warmup = 500;
    double learning_rate = 1e-3;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    double exploration_fraction = 0.5;
    double gradient_clip = 10.0;
    std::size_t scale_episodes = 50;  // random episodes used to fix input scaling

    void validate() const;
};

struct FittedQModel {
    Mlp net;
    Eigen::VectorXd input_scale;
    FittedQConfig config;
    std::size_t action_count = 0;
    std::size_t state_dimension = 0;

    Eigen::VectorXd features(const StateVector& state) const;
    std::vector<double> q_values(const StateVector& state) const;
};

/// Untrained model for a seed: input scaling from random rollouts, random weights.
FittedQModel initial_fitted_q(const GenerativeModel& model, const FittedQConfig& config, std::uint64_t seed);

/// Deterministic given the seed. Throws TrainingFailure if the loss stops being finite.
FittedQModel fitted_q_train(const GenerativeModel& model, const FittedQConfig& config, std::uint64_t seed);

class FittedQPolicy final : public BaselinePolicy {
public:
    explicit FittedQPolicy(std::shared_ptr<const FittedQModel> model);

    ScoreKind kind() const override { return ScoreKind::ActionValues; }
    std::size_t action_count() const override { return model_->action_count; }
    std::size_t state_dimension() const override { return model_->state_dimension; }
    std::vector<double> scores(const StateVector& state) const override;
    using BaselinePolicy::scores;

    const FittedQModel& model() const noexcept { return *model_; }

private:
    std::shared_ptr<const FittedQModel> model_;
};

}  // namespace sptree::baselines
