#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "etlnet/experiments.hpp"

namespace etlnet {

// The full resolved configuration of any run. Serialized as flat
// "section.key=value" lines; '#' starts a comment.
using RunConfig = SweepSpec;

// Every accepted key with its value in cfg, sorted.
std::map<std::string, std::string> run_config_to_kv(const RunConfig& cfg);
std::string run_config_to_text(const RunConfig& cfg);

// Applies key=value pairs on top of base. Unknown keys and malformed values
// throw ConfigError.
RunConfig apply_settings(RunConfig base, const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> parse_settings(std::string_view text, std::string_view origin = "<config>");
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

}  // namespace etlnet
