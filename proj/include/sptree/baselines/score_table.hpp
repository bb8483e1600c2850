#pragma once

// Imports action scores computed elsewhere.
//
// Text format, one record per enumerated state:
//
//   # comment lines and blank lines are ignored
//   kind values            (optional first record; "values" or "probabilities")
//   <state_index> <score_0> <score_1> ... <score_{n-1}>
//
// Scores are decimal literals in action-index order. State indices follow the
// model's EnumerableMdp numbering (for the grid world, y * width + x).

#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <vector>

#include "sptree/enumerable.hpp"
#include "sptree/mdp.hpp"

namespace sptree::baselines {

struct ScoreTable {
    ScoreKind kind = ScoreKind::ActionValues;
    std::size_t n_actions = 0;
    std::map<std::size_t, std::vector<double>> rows;
};

ScoreTable parse_score_table(std::istream& in);
ScoreTable load_score_table(const std::filesystem::path& path);

class ScoreTablePolicy final : public BaselinePolicy {
public:
    ScoreTablePolicy(std::shared_ptr<const ScoreTable> table, std::shared_ptr<const GenerativeModel> model);

    ScoreKind kind() const override { return table_->kind; }
    std::size_t action_count() const override { return table_->n_actions; }
    std::size_t state_dimension() const override { return model_->state_dimension(); }
    std::vector<double> scores(const StateVector& state) const override;
    using BaselinePolicy::scores;

private:
    std::shared_ptr<const ScoreTable> table_;
    std::shared_ptr<const GenerativeModel> model_;
    const EnumerableMdp* view_;
};

}  // namespace sptree::baselines
