#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "sptree/enumerable.hpp"
#include "sptree/mdp.hpp"

namespace sptree::baselines {

class UnsupportedEnvironment : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Tabular action values Q(s, a) over an enumerated state space.
struct ValueTable {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    double gamma = 1.0;
    std::vector<double> q;  // row-major n_states x n_actions
    std::vector<double> v;
    double residual = 0.0;                 // sup-norm Bellman residual of v
    std::size_t sweeps = 0;
    std::vector<double> residual_history;  // residual before each sweep's update

    std::span<const double> q_row(std::size_t s) const { return {q.data() + s * n_actions, n_actions}; }
};

/// Synchronous value iteration until the sup-norm Bellman residual is <= tol.
/// Terminal states have value 0.
ValueTable value_iteration(const EnumerableMdp& mdp, double gamma, double tol, std::size_t max_sweeps = 1'000'000);
/// Throws UnsupportedEnvironment when the model has no exact-transition view.
ValueTable value_iteration(const GenerativeModel& model, double gamma, double tol,
                           std::size_t max_sweeps = 1'000'000);

/// sup_s |max_a Q(s,a) - v(s)| where Q is one Bellman backup of v.
double bellman_residual(const EnumerableMdp& mdp, double gamma, std::span<const double> v);

/// Binary layout (little-endian): "SPVT", u32 version, u64 n_states,
/// u64 n_actions, f64 gamma, f64 residual, then n_states * n_actions f64
/// action values in row-major order.
void save_value_table(const ValueTable& table, const std::filesystem::path& path);
ValueTable load_value_table(const std::filesystem::path& path);

inline constexpr std::uint32_t kValueTableVersion = 1;

/// Greedy-by-Q policy over an enumerable model's states.
class ValueTablePolicy final : public BaselinePolicy {
public:
    ValueTablePolicy(std::shared_ptr<const ValueTable> table, std::shared_ptr<const GenerativeModel> model);

    ScoreKind kind() const override { return ScoreKind::ActionValues; }
    std::size_t action_count() const override { return table_->n_actions; }
    std::size_t state_dimension() const override { return model_->state_dimension(); }
    std::vector<double> scores(const StateVector& state) const override;
    using BaselinePolicy::scores;

    const ValueTable& table() const noexcept { return *table_; }

private:
    std::shared_ptr<const ValueTable> table_;
    std::shared_ptr<const GenerativeModel> model_;
    const EnumerableMdp* view_;
};

}  // namespace sptree::baselines
