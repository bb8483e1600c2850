#pragma once

// Portable tree documents (JSON, ".tree"), Graphviz rendering and episode
// trace export.
//
// TreeDocument schema, version 1:
//   {
//     "schema_version": 1,
//     "build_config": {"n_particles", "n_min", "d_max", "delta_star", "c_max", "seed", "delta_mode"},
//     "n_initial": <particles at the root>,
//     "nodes": [ {"id", "parent" (null at the root), "action", "label", "depth", "count",
//                 "reach_probability", "value_estimate", "terminal_fraction", "summary"} ... ],
//     "most_likely_path": [ids from the root]
//   }
// Nodes appear in id order; ids are a pre-order numbering, so parents precede children.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sptree/executor.hpp"
#include "sptree/tree.hpp"

namespace sptree::io {

inline constexpr int kTreeSchemaVersion = 1;

class DocumentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct NodeRecord {
    std::size_t id = 0;
    std::optional<std::size_t> parent;
    std::size_t action = 0;
    std::string label;
    std::size_t depth = 0;
    std::size_t count = 0;
    double reach_probability = 0.0;
    double value_estimate = 0.0;
    double terminal_fraction = 0.0;
    std::string summary;

    friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

struct TreeDocument {
    int schema_version = kTreeSchemaVersion;
    BuildConfig build_config;
    std::size_t n_initial = 0;
    std::vector<NodeRecord> nodes;
    std::vector<std::size_t> most_likely_path;

    const NodeRecord& node(std::size_t id) const;
    /// Throws DocumentError on duplicate ids, dangling or cyclic parents, or a bad root.
    void validate() const;

    friend bool operator==(const TreeDocument&, const TreeDocument&) = default;
};

using ParticleDescriber = std::function<std::string(std::span<const Particle>)>;
using ActionLabeler = std::function<std::string(ActionId)>;

TreeDocument serialize_tree(const PolicyTree& tree, const ActionLabeler& label, const ParticleDescriber& describe);
/// Labels and summaries from the model's own describers.
TreeDocument serialize_tree(const PolicyTree& tree, const GenerativeModel& model);

nlohmann::json to_json(const TreeDocument& doc);
TreeDocument tree_document_from_json(const nlohmann::json& j);
TreeDocument parse_tree_document(const std::string& text);

void save_tree_document(const TreeDocument& doc, const std::filesystem::path& path);
TreeDocument load_tree_document(const std::filesystem::path& path);

nlohmann::json to_json(const BuildConfig& config);
BuildConfig build_config_from_json(const nlohmann::json& j);

struct DotStyle {
    double min_width = 1.0;
    double max_width = 8.0;
    std::string path_color = "blue";
    std::string edge_color = "black";
    bool show_summary = false;
};

/// Width for a reach probability: linear between min and max, clamped.
double pen_width(double reach_probability, const DotStyle& style);

std::string render_dot(const TreeDocument& doc, const DotStyle& style = {});

/// Episode trace: {"return", "discounted_return", "steps", "done", "rebuilds", "exit_depths",
/// "trace": [{"step", "action", "label", "reward", "node_id", "tree_index", "state"}]}.
nlohmann::json episode_to_json(const EpisodeRecord& episode, const ActionLabeler& label);

}  // namespace sptree::io
