#pragma once

#include <map>
#include <string>

#include "tokenlab/trainer.hpp"

namespace tokenlab {

// Flat key=value configuration. '#' starts a comment, blank lines are
// skipped, keys are dotted (task.*, policy.*, trainer.*, run.*). Parsing into
// a RunConfig rejects unknown keys and malformed values with the offending
// key named; serialization emits every key sorted, with doubles at full
// precision, so a resolved snapshot reproduces the run exactly.
struct ConfigMap {
    std::map<std::string, std::string> kv;

    static ConfigMap parse_string(const std::string& text);
    static ConfigMap parse_file(const std::string& path);
    void set(const std::string& key, const std::string& value);
};

RunConfig run_config_from(const ConfigMap& map);
ConfigMap config_map_of(const RunConfig& cfg);
std::string serialize(const RunConfig& cfg);

// Applies a single "key=value" override string.
void apply_override(ConfigMap& map, const std::string& spec);

}  // namespace tokenlab
