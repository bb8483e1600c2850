#include "sptree/export.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace sptree::io {

using nlohmann::json;

const NodeRecord& TreeDocument::node(std::size_t id) const {
    for (const auto& n : nodes) {
        if (n.id == id) {
            return n;
        }
    }
    throw DocumentError("no node with id " + std::to_string(id));
}

void TreeDocument::validate() const {
    if (schema_version != kTreeSchemaVersion) {
        throw DocumentError("unsupported tree schema version " + std::to_string(schema_version));
    }
    if (nodes.empty()) {
        throw DocumentError("tree document has no nodes");
    }
    std::map<std::size_t, const NodeRecord*> by_id;
    for (const auto& n : nodes) {
        if (!by_id.emplace(n.id, &n).second) {
            throw DocumentError("duplicate node id " + std::to_string(n.id));
        }
    }
    std::size_t roots = 0;
    for (const auto& n : nodes) {
        if (!n.parent) {
            ++roots;
            if (n.reach_probability != 1.0) {
                throw DocumentError("root reach probability must be 1");
            }
            continue;
        }
        // Walk up; a cycle would revisit a node before reaching the root.
        std::set<std::size_t> seen{n.id};
        for (auto p = n.parent; p;) {
            auto it = by_id.find(*p);
            if (it == by_id.end()) {
                throw DocumentError("node " + std::to_string(n.id) + " has unknown parent " + std::to_string(*p));
            }
            if (!seen.insert(*p).second) {
                throw DocumentError("parent cycle through node " + std::to_string(*p));
            }
            p = it->second->parent;
        }
    }
    if (roots != 1) {
        throw DocumentError("tree document must have exactly one root");
    }
    for (std::size_t id : most_likely_path) {
        if (!by_id.contains(id)) {
            throw DocumentError("most likely path names unknown node " + std::to_string(id));
        }
    }
}

namespace {

void emit(const ActionNode& node, std::optional<std::size_t> parent, const ActionLabeler& label,
          const ParticleDescriber& describe, std::vector<NodeRecord>& out) {
    NodeRecord r;
    r.id = node.id;
    r.parent = parent;
    r.action = node.action.index;
    r.label = label(node.action);
    r.depth = node.depth;
    r.count = node.particles.size();
    r.reach_probability = node.reach_probability;
    r.value_estimate = node.value_estimate;
    r.terminal_fraction = node.terminal_fraction;
    r.summary = describe(node.particles);
    out.push_back(std::move(r));
    for (const auto& c : node.children) {
        emit(c, node.id, label, describe, out);
    }
}

}  // namespace

TreeDocument serialize_tree(const PolicyTree& tree, const ActionLabeler& label, const ParticleDescriber& describe) {
    TreeDocument doc;
    doc.build_config = tree.config;
    doc.n_initial = tree.n_initial;
    emit(tree.root, std::nullopt, label, describe, doc.nodes);
    std::sort(doc.nodes.begin(), doc.nodes.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    doc.most_likely_path = tree.most_likely_path();
    return doc;
}

TreeDocument serialize_tree(const PolicyTree& tree, const GenerativeModel& model) {
    return serialize_tree(
        tree, [&](ActionId a) { return model.action_label(a); },
        [&](std::span<const Particle> ps) { return model.describe_particles(ps); });
}

json to_json(const BuildConfig& c) {
    return json{{"n_particles", c.n_particles},
                {"n_min", c.n_min},
                {"d_max", c.d_max},
                {"delta_star", c.delta_star},
                {"c_max", c.c_max},
                {"seed", c.seed},
                {"delta_mode", c.delta_mode == DeltaAggregation::Mean ? "mean" : "sum"}};
}

BuildConfig build_config_from_json(const json& j) {
    if (!j.is_object()) {
        throw DocumentError("build config must be an object");
    }
    BuildConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "n_particles") {
            c.n_particles = value.get<std::size_t>();
        } else if (key == "n_min") {
            c.n_min = value.get<std::size_t>();
        } else if (key == "d_max") {
            c.d_max = value.get<std::size_t>();
        } else if (key == "delta_star") {
            c.delta_star = value.get<double>();
        } else if (key == "c_max") {
            c.c_max = value.get<std::size_t>();
        } else if (key == "seed") {
            c.seed = value.get<std::uint64_t>();
        } else if (key == "delta_mode") {
            const auto mode = value.get<std::string>();
            if (mode != "mean" && mode != "sum") {
                throw DocumentError("delta_mode must be 'mean' or 'sum'");
            }
            c.delta_mode = mode == "mean" ? DeltaAggregation::Mean : DeltaAggregation::Sum;
        } else {
            throw DocumentError("unknown build parameter '" + key + "'");
        }
    }
    return c;
}

json to_json(const TreeDocument& doc) {
    json nodes = json::array();
    for (const auto& n : doc.nodes) {
        nodes.push_back(json{{"id", n.id},
                             {"parent", n.parent ? json(*n.parent) : json(nullptr)},
                             {"action", n.action},
                             {"label", n.label},
                             {"depth", n.depth},
                             {"count", n.count},
                             {"reach_probability", n.reach_probability},
                             {"value_estimate", n.value_estimate},
                             {"terminal_fraction", n.terminal_fraction},
                             {"summary", n.summary}});
    }
    return json{{"schema_version", doc.schema_version},
                {"build_config", to_json(doc.build_config)},
                {"n_initial", doc.n_initial},
                {"nodes", std::move(nodes)},
                {"most_likely_path", doc.most_likely_path}};
}

TreeDocument tree_document_from_json(const json& j) {
    TreeDocument doc;
    try {
        doc.schema_version = j.at("schema_version").get<int>();
        if (doc.schema_version != kTreeSchemaVersion) {
            throw DocumentError("unsupported tree schema version " + std::to_string(doc.schema_version));
        }
        doc.build_config = build_config_from_json(j.at("build_config"));
        doc.n_initial = j.at("n_initial").get<std::size_t>();
        for (const auto& n : j.at("nodes")) {
            NodeRecord r;
            r.id = n.at("id").get<std::size_t>();
            if (!n.at("parent").is_null()) {
                r.parent = n.at("parent").get<std::size_t>();
            }
            r.action = n.at("action").get<std::size_t>();
            r.label = n.at("label").get<std::string>();
            r.depth = n.at("depth").get<std::size_t>();
            r.count = n.at("count").get<std::size_t>();
            r.reach_probability = n.at("reach_probability").get<double>();
            r.value_estimate = n.at("value_estimate").get<double>();
            r.terminal_fraction = n.at("terminal_fraction").get<double>();
            r.summary = n.at("summary").get<std::string>();
            doc.nodes.push_back(std::move(r));
        }
        doc.most_likely_path = j.at("most_likely_path").get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
        throw DocumentError(std::string("malformed tree document: ") + e.what());
    }
    doc.validate();
    return doc;
}

TreeDocument parse_tree_document(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DocumentError(std::string("tree document is not valid JSON: ") + e.what());
    }
    return tree_document_from_json(j);
}

void save_tree_document(const TreeDocument& doc, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << to_json(doc).dump(2) << '\n';
}

TreeDocument load_tree_document(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_tree_document(buffer.str());
}

double pen_width(double reach_probability, const DotStyle& style) {
    const double p = std::clamp(reach_probability, 0.0, 1.0);
    return style.min_width + (style.max_width - style.min_width) * p;
}

namespace {

std::string escape(const std::string& text) {
    std::string out;
    for (char c : text) {
        if (c == '"' || c == '\\') {
            out += '\\';
        }
        out += c;
    }
    return out;
}

}  // namespace

std::string render_dot(const TreeDocument& doc, const DotStyle& style) {
    doc.validate();
    std::vector<const NodeRecord*> ordered;
    for (const auto& n : doc.nodes) {
        ordered.push_back(&n);
    }
    std::sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) { return a->id < b->id; });

    std::set<std::pair<std::size_t, std::size_t>> path_edges;
    for (std::size_t i = 1; i < doc.most_likely_path.size(); ++i) {
        path_edges.emplace(doc.most_likely_path[i - 1], doc.most_likely_path[i]);
    }

    std::ostringstream out;
    out << std::setprecision(4);
    out << "digraph policy_tree {\n";
    out << "  node [shape=box, style=rounded];\n";
    for (const auto* n : ordered) {
        std::ostringstream label;
        label << std::fixed << std::setprecision(2) << escape(n->label) << "\\nV=" << n->value_estimate
              << "\\nP=" << n->reach_probability;
        if (style.show_summary && !n->summary.empty()) {
            label << "\\n" << escape(n->summary);
        }
        out << "  n" << n->id << " [label=\"" << label.str() << "\", penwidth=" << pen_width(n->reach_probability, style)
            << "];\n";
    }
    for (const auto* n : ordered) {
        if (!n->parent) {
            continue;
        }
        const bool on_path = path_edges.contains({*n->parent, n->id});
        out << "  n" << *n->parent << " -> n" << n->id << " [penwidth=" << pen_width(n->reach_probability, style)
            << ", color=" << (on_path ? style.path_color : style.edge_color) << "];\n";
    }
    out << "}\n";
    return out.str();
}

json episode_to_json(const EpisodeRecord& episode, const ActionLabeler& label) {
    json trace = json::array();
    for (const auto& t : episode.trace) {
        trace.push_back(json{{"step", t.step},
                             {"action", t.action.index},
                             {"label", label(t.action)},
                             {"reward", t.reward},
                             {"node_id", t.node_id ? json(*t.node_id) : json(nullptr)},
                             {"tree_index", t.tree_index},
                             {"state", t.state_summary}});
    }
    return json{{"return", episode.total_return},
                {"discounted_return", episode.discounted_return},
                {"steps", episode.steps},
                {"done", episode.done},
                {"rebuilds", episode.rebuilds},
                {"exit_depths", episode.exit_depths},
                {"trace", std::move(trace)}};
}

}  // namespace sptree::io
