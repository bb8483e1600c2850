#include "sptree/baselines/score_table.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "sptree/baselines/value_iteration.hpp"

namespace sptree::baselines {

ScoreTable parse_score_table(std::istream& in) {
    ScoreTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream fields(line);
        std::string first;
        if (!(fields >> first)) {
            continue;
        }
        if (first == "kind") {
            std::string kind;
            fields >> kind;
            if (kind == "values") {
                table.kind = ScoreKind::ActionValues;
            } else if (kind == "probabilities") {
                table.kind = ScoreKind::Probabilities;
            } else {
                throw std::runtime_error("line " + std::to_string(line_no) + ": unknown score kind '" + kind + "'");
            }
            continue;
        }
        std::size_t index = 0;
        try {
            std::size_t used = 0;
            index = std::stoul(first, &used);
            if (used != first.size()) {
                throw std::invalid_argument(first);
            }
        } catch (const std::exception&) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": bad state index '" + first + "'");
        }
        std::vector<double> row;
        double v = 0.0;
        while (fields >> v) {
            if (!std::isfinite(v)) {
                throw std::runtime_error("line " + std::to_string(line_no) + ": non-finite score");
            }
            row.push_back(v);
        }
        if (!fields.eof()) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": malformed score");
        }
        if (row.empty()) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": no scores");
        }
        if (table.n_actions == 0) {
            table.n_actions = row.size();
        } else if (row.size() != table.n_actions) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(table.n_actions) + " scores");
        }
        if (!table.rows.emplace(index, std::move(row)).second) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": duplicate state " + first);
        }
    }
    if (table.rows.empty()) {
        throw std::runtime_error("score table has no records");
    }
    return table;
}

ScoreTable load_score_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    return parse_score_table(in);
}

ScoreTablePolicy::ScoreTablePolicy(std::shared_ptr<const ScoreTable> table, std::shared_ptr<const GenerativeModel> model)
    : table_(std::move(table)), model_(std::move(model)), view_(model_ ? model_->enumerable() : nullptr) {
    if (!table_ || view_ == nullptr) {
        throw UnsupportedEnvironment("score table policy needs an enumerable model");
    }
    if (table_->n_actions != model_->action_count()) {
        throw ContractViolation("score table action count does not match the model");
    }
}

std::vector<double> ScoreTablePolicy::scores(const StateVector& state) const {
    const std::size_t index = view_->index_of(state);
    auto it = table_->rows.find(index);
    if (it == table_->rows.end()) {
        throw ContractViolation("score table has no record for state " + std::to_string(index));
    }
    return it->second;
}

}  // namespace sptree::baselines
