#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "taf/model.hpp"

namespace taf {

// Versioned binary checkpoint: named parameter tensors (name, shape,
// little-endian f64 row-major values) plus a flat key=value config echo.
// The echo must carry the model.* keys so the parameter layout can be
// rebuilt on load.
void save_checkpoint(const std::filesystem::path& path,
                     const ModelParams& params, const std::string& config_echo);

struct LoadedCheckpoint {
  ModelParams params;
  std::string config_echo;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// key=value text helpers shared by checkpoints and config echoes. Lines
// starting with '#' and blank lines are ignored.
std::map<std::string, std::string> parse_key_values(const std::string& text);
std::string model_config_echo(const ModelConfig& cfg);
ModelConfig model_config_from_echo(const std::map<std::string, std::string>& kv);

}  // namespace taf
