#include "sptree/baselines/value_iteration.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace sptree::baselines {

namespace {

/// One synchronous backup of v into q and next_v; returns the sup-norm change.
double backup(const EnumerableMdp& mdp, double gamma, std::span<const double> v, std::vector<double>& q,
              std::vector<double>& next_v) {
    const std::size_t n = mdp.state_count();
    const std::size_t m = mdp.action_count();
    double residual = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        if (mdp.is_terminal(s)) {
            std::fill_n(q.begin() + static_cast<std::ptrdiff_t>(s * m), m, 0.0);
            next_v[s] = 0.0;
            residual = std::max(residual, std::fabs(v[s]));
            continue;
        }
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < m; ++a) {
            double value = 0.0;
            for (const auto& t : mdp.transitions(s, ActionId{a})) {
                value += t.probability * (t.reward + (t.terminal ? 0.0 : gamma * v[t.next]));
            }
            q[s * m + a] = value;
            best = std::max(best, value);
        }
        next_v[s] = best;
        residual = std::max(residual, std::fabs(best - v[s]));
    }
    return residual;
}

}  // namespace

ValueTable value_iteration(const EnumerableMdp& mdp, double gamma, double tol, std::size_t max_sweeps) {
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw ContractViolation("discount must be in (0, 1]");
    }
    if (!(tol > 0.0)) {
        throw ContractViolation("tolerance must be positive");
    }
    ValueTable table;
    table.n_states = mdp.state_count();
    table.n_actions = mdp.action_count();
    table.gamma = gamma;
    table.q.assign(table.n_states * table.n_actions, 0.0);
    table.v.assign(table.n_states, 0.0);

    std::vector<double> next_v(table.n_states);
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        const double change = backup(mdp, gamma, table.v, table.q, next_v);
        table.residual_history.push_back(change);
        table.v.swap(next_v);
        ++table.sweeps;
        if (change <= tol) {
            break;
        }
    }
    // Report the residual of the returned values, and make q consistent with them.
    table.residual = backup(mdp, gamma, table.v, table.q, next_v);
    return table;
}

ValueTable value_iteration(const GenerativeModel& model, double gamma, double tol, std::size_t max_sweeps) {
    const EnumerableMdp* view = model.enumerable();
    if (view == nullptr) {
        throw UnsupportedEnvironment("value iteration needs an environment with exact transitions");
    }
    return value_iteration(*view, gamma, tol, max_sweeps);
}

double bellman_residual(const EnumerableMdp& mdp, double gamma, std::span<const double> v) {
    std::vector<double> q(mdp.state_count() * mdp.action_count());
    std::vector<double> next_v(mdp.state_count());
    return backup(mdp, gamma, v, q, next_v);
}

namespace {

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) {
        throw std::runtime_error("truncated value table");
    }
    return value;
}

constexpr char kMagic[4] = {'S', 'P', 'V', 'T'};

}  // namespace

void save_value_table(const ValueTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out.write(kMagic, 4);
    write_pod(out, kValueTableVersion);
    write_pod(out, static_cast<std::uint64_t>(table.n_states));
    write_pod(out, static_cast<std::uint64_t>(table.n_actions));
    write_pod(out, table.gamma);
    write_pod(out, table.residual);
    out.write(reinterpret_cast<const char*>(table.q.data()),
              static_cast<std::streamsize>(table.q.size() * sizeof(double)));
}

ValueTable load_value_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error(path.string() + " is not a value table");
    }
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kValueTableVersion) {
        throw std::runtime_error("unsupported value table version " + std::to_string(version));
    }
    ValueTable table;
    table.n_states = read_pod<std::uint64_t>(in);
    table.n_actions = read_pod<std::uint64_t>(in);
    table.gamma = read_pod<double>(in);
    table.residual = read_pod<double>(in);
    table.q.resize(table.n_states * table.n_actions);
    in.read(reinterpret_cast<char*>(table.q.data()), static_cast<std::streamsize>(table.q.size() * sizeof(double)));
    if (!in) {
        throw std::runtime_error("truncated value table");
    }
    table.v.resize(table.n_states);
    for (std::size_t s = 0; s < table.n_states; ++s) {
        const auto row = table.q_row(s);
        table.v[s] = *std::max_element(row.begin(), row.end());
    }
    return table;
}

ValueTablePolicy::ValueTablePolicy(std::shared_ptr<const ValueTable> table, std::shared_ptr<const GenerativeModel> model)
    : table_(std::move(table)), model_(std::move(model)), view_(model_ ? model_->enumerable() : nullptr) {
    if (!table_ || view_ == nullptr) {
        throw UnsupportedEnvironment("value table policy needs an enumerable model");
    }
    if (view_->state_count() != table_->n_states || view_->action_count() != table_->n_actions) {
        throw ContractViolation("value table does not match the model's state/action space");
    }
}

std::vector<double> ValueTablePolicy::scores(const StateVector& state) const {
    const auto row = table_->q_row(view_->index_of(state));
    return {row.begin(), row.end()};
}

}  // namespace sptree::baselines
