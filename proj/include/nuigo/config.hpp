// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "nuigo/synthesis.hpp"
#include "nuigo/trainer.hpp"

namespace nuigo {

// Flat key=value configuration. '#' starts a comment, blank lines are
// skipped, duplicate keys are an error. Values keep their raw text.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap load_config_file(const std::filesystem::path& file);
void save_config_file(const std::filesystem::path& file, const ConfigMap& cfg);

// Round-trips between typed configs and ConfigMap. apply_config rejects
// unknown keys so typos fail loudly; to_config emits every field, giving each
// output directory a complete record of the effective settings.
void apply_config(TrainConfig& cfg, const ConfigMap& map);
ConfigMap to_config(const TrainConfig& cfg);
void apply_config(SynthesisConfig& cfg, const ConfigMap& map);
ConfigMap to_config(const SynthesisConfig& cfg);

}  // namespace nuigo
