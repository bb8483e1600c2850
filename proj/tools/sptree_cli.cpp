// Command-line front end: sweeps, tree builds, exports, solving, episodes and the HTTP service.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sptree/baselines/value_iteration.hpp"
#include "sptree/env/config.hpp"
#include "sptree/executor.hpp"
#include "sptree/experiments.hpp"
#include "sptree/export.hpp"
#include "sptree/service/http.hpp"
#include "sptree/service/registry.hpp"

using namespace sptree;
using nlohmann::json;

namespace {

struct BuildFlags {
    std::size_t n_particles = 1000;
    std::size_t n_min = 250;
    std::size_t d_max = 10;
    double delta_star = 0.01;
    std::size_t c_max = 4;
    std::string delta_mode = "mean";

    void add(CLI::App& app) {
        app.add_option("--n-particles", n_particles, "Particles at the root")->capture_default_str();
        app.add_option("--n-min", n_min, "Minimum particles to expand a node")->capture_default_str();
        app.add_option("--d-max", d_max, "Maximum tree depth")->capture_default_str();
        app.add_option("--delta-star", delta_star, "Clustering error threshold")->capture_default_str();
        app.add_option("--c-max", c_max, "Maximum clusters per expansion")->capture_default_str();
        app.add_option("--delta-mode", delta_mode, "Clustering error aggregation")
            ->check(CLI::IsMember({"mean", "sum"}))
            ->capture_default_str();
    }

    BuildConfig config(std::uint64_t seed) const {
        BuildConfig c;
        c.n_particles = n_particles;
        c.n_min = n_min;
        c.d_max = d_max;
        c.delta_star = delta_star;
        c.c_max = c_max;
        c.seed = seed;
        c.delta_mode = delta_mode == "sum" ? DeltaAggregation::Sum : DeltaAggregation::Mean;
        c.validate();
        return c;
    }
};

json read_params(const std::string& path) {
    return path.empty() ? json::object() : env::load_json_file(path);
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    out << text;
}

json policy_options(const std::string& policy) {
    json options = json::object();
    if (!policy.empty()) {
        options["policy"] = policy;
    }
    return options;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Local surrogate policy trees for MDPs and POMDPs"};
    app.set_config("--config", "", "Read flags from a TOML/INI file");
    app.require_subcommand(1);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Grid-world parameter sweep with paired baseline/tree episodes");
    std::string sweep_env = "grid";
    std::string vary;
    std::size_t trials = 500;
    std::uint64_t sweep_seed = 0;
    std::string sweep_out;
    std::string sweep_format;
    std::string sweep_params;
    std::size_t threads = 0;
    BuildFlags sweep_build;
    sweep->add_option("--env", sweep_env, "Environment")->check(CLI::IsMember({"grid"}))->capture_default_str();
    sweep->add_option("--vary", vary, "Parameter and values, e.g. p=0.5,0.7,0.9,1.0")->required();
    sweep->add_option("--trials", trials, "Trials per configuration")->capture_default_str();
    sweep->add_option("--seed", sweep_seed, "Master seed")->capture_default_str();
    sweep->add_option("--out", sweep_out, "Output file (default stdout)");
    sweep->add_option("--format", sweep_format, "text or csv (default: csv for .csv outputs)")
        ->check(CLI::IsMember({"text", "csv"}));
    sweep->add_option("--params", sweep_params, "Grid parameter file (JSON)");
    sweep->add_option("--threads", threads, "Worker threads (default SPTREE_THREADS or all cores)");
    sweep_build.add(*sweep);

    // solve
    auto* solve = app.add_subcommand("solve", "Value iteration on the grid world");
    std::string solve_params;
    std::string solve_out;
    double tol = 1e-10;
    std::size_t max_sweeps = 100000;
    solve->add_option("--params", solve_params, "Grid parameter file (JSON)");
    solve->add_option("--out", solve_out, "Value table output (.spvt)");
    solve->add_option("--tol", tol, "Sup-norm Bellman residual tolerance")->capture_default_str();
    solve->add_option("--max-sweeps", max_sweeps, "Sweep limit")->capture_default_str();

    // build
    auto* build = app.add_subcommand("build", "Build a policy tree at the initial state");
    std::string build_env = "grid";
    std::string build_params;
    std::string build_policy;
    std::uint64_t build_seed = 0;
    std::string build_out;
    BuildFlags build_flags;
    build->add_option("--env", build_env, "grid, vaccine or cyber")
        ->check(CLI::IsMember(service::environment_kinds()))
        ->capture_default_str();
    build->add_option("--params", build_params, "Environment parameter file (JSON)");
    build->add_option("--policy", build_policy, "Vaccine baseline: fitted_q or lookahead");
    build->add_option("--seed", build_seed, "Seed")->capture_default_str();
    build->add_option("--out", build_out, "Tree document output (.tree)");
    build_flags.add(*build);

    // export
    auto* exporter = app.add_subcommand("export", "Render a tree document");
    std::string tree_path;
    std::string export_format = "dot";
    std::string export_out;
    io::DotStyle style;
    exporter->add_option("--tree", tree_path, "Tree document (.tree)")->required()->check(CLI::ExistingFile);
    exporter->add_option("--format", export_format, "dot or json")
        ->check(CLI::IsMember({"dot", "json"}))
        ->capture_default_str();
    exporter->add_option("--out", export_out, "Output file (default stdout)");
    exporter->add_option("--min-width", style.min_width, "Pen width at probability 0")->capture_default_str();
    exporter->add_option("--max-width", style.max_width, "Pen width at probability 1")->capture_default_str();
    exporter->add_flag("--show-summary", style.show_summary, "Add state summaries to node labels");

    // episode
    auto* episode = app.add_subcommand("episode", "Run one tree-policy episode and write its trace");
    std::string episode_env = "grid";
    std::string episode_params;
    std::string episode_policy;
    std::uint64_t episode_seed = 0;
    std::string episode_out;
    std::string leaf = "baseline";
    std::size_t max_steps = 1000;
    BuildFlags episode_flags;
    episode->add_option("--env", episode_env, "grid, vaccine or cyber")
        ->check(CLI::IsMember(service::environment_kinds()))
        ->capture_default_str();
    episode->add_option("--params", episode_params, "Environment parameter file (JSON)");
    episode->add_option("--policy", episode_policy, "Vaccine baseline: fitted_q or lookahead");
    episode->add_option("--seed", episode_seed, "Episode seed")->capture_default_str();
    episode->add_option("--leaf", leaf, "After a leaf: rebuild, baseline or stop")
        ->check(CLI::IsMember({"rebuild", "baseline", "stop"}))
        ->capture_default_str();
    episode->add_option("--max-steps", max_steps, "Step limit")->capture_default_str();
    episode->add_option("--out", episode_out, "Trace output (JSON, default stdout)");
    episode_flags.add(*episode);

    // serve
    auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string db;
    serve->add_option("--host", host, "Bind address")->capture_default_str();
    serve->add_option("--port", port, "Port")->envname("SPTREE_PORT")->capture_default_str();
    serve->add_option("--db", db, "SQLite session store (default: in memory)")->envname("SPTREE_DB");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sweep) {
            const auto eq = vary.find('=');
            if (eq == std::string::npos) {
                throw CLI::ValidationError("--vary", "expected name=v1,v2,...");
            }
            experiments::SweepSpec spec;
            spec.grid = env::grid_params_from_json(read_params(sweep_params));
            spec.build = sweep_build.config(sweep_seed);
            spec.parameter = vary.substr(0, eq);
            std::stringstream values(vary.substr(eq + 1));
            for (std::string v; std::getline(values, v, ',');) {
                spec.values.push_back(v);
            }
            spec.trials = trials;
            spec.seed = sweep_seed;
            spec.threads = threads;
            const auto stats = experiments::run_sweep(spec);
            std::string format = sweep_format;
            if (format.empty()) {
                format = sweep_out.size() > 4 && sweep_out.ends_with(".csv") ? "csv" : "text";
            }
            write_output(sweep_out, experiments::emit_table(stats, format == "csv" ? experiments::TableFormat::Csv
                                                                                    : experiments::TableFormat::Text));
        } else if (*solve) {
            const env::GridWorld grid(env::grid_params_from_json(read_params(solve_params)));
            const auto table = baselines::value_iteration(static_cast<const EnumerableMdp&>(grid),
                                                          grid.params().discount, tol, max_sweeps);
            std::cout << "states " << table.n_states << ", actions " << table.n_actions << ", sweeps " << table.sweeps
                      << ", residual " << table.residual << '\n';
            if (!solve_out.empty()) {
                baselines::save_value_table(table, solve_out);
            }
        } else if (*build) {
            const auto environment =
                service::make_environment(build_env, read_params(build_params), policy_options(build_policy));
            const auto tree = build_tree(*environment.model, *environment.policy,
                                         initial_query(*environment.model, build_seed), build_flags.config(build_seed));
            const auto doc = io::serialize_tree(tree, *environment.model);
            if (build_out.empty()) {
                std::cout << io::to_json(doc).dump(2) << '\n';
            } else {
                io::save_tree_document(doc, build_out);
                std::cerr << tree.stats.node_count << " nodes, mean leaf depth " << tree.mean_leaf_depth() << '\n';
            }
        } else if (*exporter) {
            const auto doc = io::load_tree_document(tree_path);
            write_output(export_out, export_format == "dot" ? io::render_dot(doc, style) : io::to_json(doc).dump(2) + "\n");
        } else if (*episode) {
            const auto environment =
                service::make_environment(episode_env, read_params(episode_params), policy_options(episode_policy));
            ControllerConfig config;
            config.rebuild_at_leaf = leaf == "rebuild";
            config.fallback = leaf == "stop" ? LeafFallback::None : LeafFallback::Baseline;
            config.max_steps = max_steps;
            const auto record = run_episode(*environment.model, *environment.policy, config,
                                            episode_flags.config(episode_seed), episode_seed);
            const auto& model = *environment.model;
            write_output(episode_out,
                         io::episode_to_json(record, [&](ActionId a) { return model.action_label(a); }).dump(2) + "\n");
        } else if (*serve) {
            std::unique_ptr<service::SessionStore> store;
            if (db.empty()) {
                store = std::make_unique<service::MemoryStore>();
            } else {
                store = std::make_unique<service::SqliteStore>(db);
            }
            service::SessionManager sessions(std::move(store));
            service::ApiServer server(sessions);
            std::cerr << "listening on " << host << ':' << port << '\n';
            if (!server.listen(host, port)) {
                std::cerr << "cannot bind " << host << ':' << port << '\n';
                return 1;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
