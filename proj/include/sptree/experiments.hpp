#pragma once

// Parameter sweeps on the grid world: for each configuration, paired baseline
// and tree-policy episodes, then relative return change and leaf depth.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sptree/env/grid_world.hpp"
#include "sptree/executor.hpp"
#include "sptree/tree.hpp"

namespace sptree::experiments {

/// Parameters a sweep can vary: grid p and n_actions, and every BuildConfig field.
inline const std::vector<std::string>& sweep_parameters() {
    static const std::vector<std::string> names{"p",     "n_actions", "n_particles", "n_min",
                                                "delta_star", "d_max", "c_max",       "delta_mode"};
    return names;
}

struct SweepSpec {
    env::GridWorldParams grid;
    BuildConfig build;
    ControllerConfig controller;  // defaults: no rebuild, baseline completes the episode
    std::string parameter = "p";
    std::vector<std::string> values;
    std::size_t trials = 500;
    std::uint64_t seed = 0;
    std::size_t threads = 0;  // 0: SPTREE_THREADS, else hardware concurrency
    double vi_tolerance = 1e-10;

    void validate() const;
};

struct TrialStats {
    std::string parameter;
    std::string value;
    std::size_t n = 0;         // trials in the relative-change mean
    std::size_t excluded = 0;  // trials with a baseline return of exactly zero
    double mean_relative_change = 0.0;  // percent
    double standard_error = 0.0;        // sample sd / sqrt(n)
    double mean_leaf_depth = 0.0;       // depth of the last tree node executed, averaged over trials
    double leaf_depth_se = 0.0;
    double mean_tree_leaf_depth = 0.0;  // unweighted mean over each tree's leaves, averaged over trials
    double mean_baseline_return = 0.0;
    double mean_tree_return = 0.0;
};

/// Configuration for one value of the varied parameter.
void apply_parameter(const std::string& name, const std::string& value, env::GridWorldParams& grid,
                     BuildConfig& build);

/// Thread count from SPTREE_THREADS, falling back to the hardware concurrency.
std::size_t default_thread_count();

/// Relative change of one paired trial in percent; empty when the baseline return is zero.
std::optional<double> relative_change(double tree_return, double baseline_return);

std::vector<TrialStats> run_sweep(const SweepSpec& spec);

enum class TableFormat { Text, Csv };

std::string emit_table(const std::vector<TrialStats>& stats, TableFormat format);

}  // namespace sptree::experiments
