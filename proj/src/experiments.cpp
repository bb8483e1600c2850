#include "sptree/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <memory>
#include <sstream>
#include <thread>

#include "sptree/baselines/value_iteration.hpp"

namespace sptree::experiments {

void SweepSpec::validate() const {
    if (std::find(sweep_parameters().begin(), sweep_parameters().end(), parameter) == sweep_parameters().end()) {
        throw ContractViolation("unknown sweep parameter '" + parameter + "'");
    }
    if (values.empty()) {
        throw ContractViolation("sweep needs at least one value");
    }
    if (trials == 0) {
        throw ContractViolation("sweep needs at least one trial");
    }
    grid.validate();
    build.validate();
    controller.validate();
}

namespace {

std::size_t parse_count(const std::string& name, const std::string& value) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || value.empty() || value.front() == '-') {
        throw ContractViolation("sweep value '" + value + "' for " + name + " is not a non-negative integer");
    }
    return static_cast<std::size_t>(v);
}

double parse_real(const std::string& name, const std::string& value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || value.empty() || !std::isfinite(v)) {
        throw ContractViolation("sweep value '" + value + "' for " + name + " is not a number");
    }
    return v;
}

struct TrialOutcome {
    double baseline_return = 0.0;
    double tree_return = 0.0;
    double exit_depth = 0.0;
    double tree_leaf_depth = 0.0;
};

double mean_of(const std::vector<double>& xs) {
    double total = 0.0;
    for (double x : xs) {
        total += x;
    }
    return xs.empty() ? 0.0 : total / static_cast<double>(xs.size());
}

double standard_error(const std::vector<double>& xs) {
    if (xs.size() < 2) {
        return 0.0;
    }
    const double m = mean_of(xs);
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - m) * (x - m);
    }
    const auto n = static_cast<double>(xs.size());
    return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

}  // namespace

void apply_parameter(const std::string& name, const std::string& value, env::GridWorldParams& grid,
                     BuildConfig& build) {
    if (name == "p") {
        grid.p_success = parse_real(name, value);
    } else if (name == "n_actions") {
        grid.n_actions = parse_count(name, value);
    } else if (name == "n_particles") {
        build.n_particles = parse_count(name, value);
    } else if (name == "n_min") {
        build.n_min = parse_count(name, value);
    } else if (name == "delta_star") {
        build.delta_star = parse_real(name, value);
    } else if (name == "d_max") {
        build.d_max = parse_count(name, value);
    } else if (name == "c_max") {
        build.c_max = parse_count(name, value);
    } else if (name == "delta_mode") {
        if (value == "mean") {
            build.delta_mode = DeltaAggregation::Mean;
        } else if (value == "sum") {
            build.delta_mode = DeltaAggregation::Sum;
        } else {
            throw ContractViolation("delta_mode must be 'mean' or 'sum', got '" + value + "'");
        }
    } else {
        throw ContractViolation("unknown sweep parameter '" + name + "'");
    }
}

std::size_t default_thread_count() {
    if (const char* env = std::getenv("SPTREE_THREADS")) {
        try {
            const auto n = std::stoul(env);
            if (n > 0) {
                return n;
            }
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::optional<double> relative_change(double tree_return, double baseline_return) {
    if (baseline_return == 0.0) {
        return std::nullopt;
    }
    return (tree_return - baseline_return) / std::fabs(baseline_return) * 100.0;
}

std::vector<TrialStats> run_sweep(const SweepSpec& spec) {
    spec.validate();
    const std::size_t threads = spec.threads > 0 ? spec.threads : default_thread_count();

    std::vector<TrialStats> out;
    for (const auto& value : spec.values) {
        env::GridWorldParams grid = spec.grid;
        BuildConfig build = spec.build;
        apply_parameter(spec.parameter, value, grid, build);
        grid.validate();
        build.validate();

        auto model = std::make_shared<env::GridWorld>(grid);
        auto table = std::make_shared<baselines::ValueTable>(
            baselines::value_iteration(static_cast<const EnumerableMdp&>(*model), grid.discount, spec.vi_tolerance, 100000));
        const baselines::ValueTablePolicy policy(table, model);

        std::vector<TrialOutcome> outcomes(spec.trials);
        auto worker = [&](std::size_t first) {
            for (std::size_t i = first; i < spec.trials; i += threads) {
                const std::uint64_t seed = derive_seed(spec.seed, {stream::kTrial, i});
                const EpisodeRecord base = run_policy_episode(*model, policy, seed, spec.controller.max_steps);
                const EpisodeRecord tree = run_episode(*model, policy, spec.controller, build, seed);
                outcomes[i] = TrialOutcome{base.total_return, tree.total_return, tree.mean_exit_depth(),
                                           tree.mean_tree_leaf_depth()};
            }
        };
        if (threads == 1) {
            worker(0);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < threads; ++t) {
                pool.emplace_back(worker, t);
            }
            for (auto& th : pool) {
                th.join();
            }
        }

        // Aggregate in seed order so results do not depend on the thread count.
        TrialStats stats;
        stats.parameter = spec.parameter;
        stats.value = value;
        std::vector<double> changes;
        std::vector<double> depths;
        std::vector<double> tree_depths;
        std::vector<double> base_returns;
        std::vector<double> tree_returns;
        for (const auto& o : outcomes) {
            depths.push_back(o.exit_depth);
            tree_depths.push_back(o.tree_leaf_depth);
            base_returns.push_back(o.baseline_return);
            tree_returns.push_back(o.tree_return);
            if (const auto c = relative_change(o.tree_return, o.baseline_return)) {
                changes.push_back(*c);
            } else {
                ++stats.excluded;
            }
        }
        stats.n = changes.size();
        stats.mean_relative_change = mean_of(changes);
        stats.standard_error = standard_error(changes);
        stats.mean_leaf_depth = mean_of(depths);
        stats.leaf_depth_se = standard_error(depths);
        stats.mean_tree_leaf_depth = mean_of(tree_depths);
        stats.mean_baseline_return = mean_of(base_returns);
        stats.mean_tree_return = mean_of(tree_returns);
        out.push_back(std::move(stats));
    }
    return out;
}

std::string emit_table(const std::vector<TrialStats>& stats, TableFormat format) {
    if (stats.empty()) {
        throw ContractViolation("no rows to emit (0 configurations)");
    }
    for (const auto& s : stats) {
        if (s.n == 0) {
            throw ContractViolation("configuration " + s.parameter + "=" + s.value + " has 0 usable trials (" +
                                    std::to_string(s.excluded) + " excluded for a zero baseline return)");
        }
    }

    std::ostringstream out;
    out << std::fixed << std::setprecision(1);
    if (format == TableFormat::Csv) {
        out << "parameter,value,relative_change,standard_error,leaf_depth,tree_leaf_depth,trials,excluded\n";
        for (const auto& s : stats) {
            out << s.parameter << ',' << s.value << ',' << std::setprecision(4) << s.mean_relative_change << ','
                << s.standard_error << ',' << s.mean_leaf_depth << ',' << s.mean_tree_leaf_depth << ',' << s.n << ','
                << s.excluded << '\n';
        }
        return out.str();
    }

    std::vector<std::array<std::string, 4>> rows;
    rows.push_back({"parameter", "value", "relative change (%)", "leaf depth"});
    for (const auto& s : stats) {
        std::ostringstream change;
        change << std::fixed << std::setprecision(1) << s.mean_relative_change << " ± " << s.standard_error;
        std::ostringstream depth;
        depth << std::fixed << std::setprecision(1) << s.mean_leaf_depth;
        rows.push_back({s.parameter, s.value, change.str(), depth.str()});
    }
    // Width in code points so the "±" does not throw off the alignment.
    auto width = [](const std::string& text) {
        return static_cast<std::size_t>(std::count_if(text.begin(), text.end(), [](char c) {
            return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
        }));
    };
    std::array<std::size_t, 4> widths{};
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < 4; ++c) {
            widths[c] = std::max(widths[c], width(r[c]));
        }
    }
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < 4; ++c) {
            out << r[c];
            if (c + 1 < 4) {
                out << std::string(widths[c] - width(r[c]) + 2, ' ');
            }
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace sptree::experiments
