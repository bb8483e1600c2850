#pragma once

// Environment parameter files. Each environment reads a flat JSON object whose
// keys are the parameter names of its *Params struct; omitted keys keep their
// defaults and unknown keys are rejected.

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "sptree/env/cyber.hpp"
#include "sptree/env/grid_world.hpp"
#include "sptree/env/sird.hpp"

namespace sptree::env {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

GridWorldParams grid_params_from_json(const nlohmann::json& j);
SirdParams sird_params_from_json(const nlohmann::json& j);
CyberParams cyber_params_from_json(const nlohmann::json& j);

nlohmann::json to_json(const GridWorldParams& p);
nlohmann::json to_json(const SirdParams& p);
nlohmann::json to_json(const CyberParams& p);

nlohmann::json load_json_file(const std::filesystem::path& path);

}  // namespace sptree::env
