// SPDX-License-Identifier: Apache-2.0
#include "nuigo/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nuigo/common.hpp"

namespace nuigo {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long r = std::stoll(v, &pos);
    require(pos == v.size(), "config: '" + key + "' is not an integer: " + v);
    return r;
  } catch (const ValidationError&) {
    throw;
  } catch (...) {
    throw ValidationError("config: '" + key + "' is not an integer: " + v);
  }
}

double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    require(pos == v.size(), "config: '" + key + "' is not a number: " + v);
    return r;
  } catch (const ValidationError&) {
    throw;
  } catch (...) {
    throw ValidationError("config: '" + key + "' is not a number: " + v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("config: '" + key + "' is not a boolean: " + v);
}

std::string real_str(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> to_real_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_real(key, trim(item)));
  require(!out.empty(), "config: '" + key + "' is empty");
  return out;
}

std::string real_list_str(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += real_str(v[i]);
  }
  return s;
}

}  // namespace

ConfigMap load_config_file(const std::filesystem::path& file) {
  std::ifstream f(file);
  require(f.good(), "cannot read config file: " + file.string());
  ConfigMap map;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, "config " + file.string() + ":" +
                                         std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    require(!key.empty(), "config " + file.string() + ":" + std::to_string(lineno) +
                              ": empty key");
    require(!map.count(key), "config " + file.string() + ":" +
                                 std::to_string(lineno) + ": duplicate key '" + key + "'");
    map[key] = trim(line.substr(eq + 1));
  }
  return map;
}

void save_config_file(const std::filesystem::path& file, const ConfigMap& cfg) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    require(f.good(), "cannot write config file: " + file.string());
    for (const auto& [k, v] : cfg) f << k << " = " << v << "\n";
    require(f.good(), "failed writing config file: " + file.string());
  }
  std::filesystem::rename(tmp, file);
}

void apply_config(TrainConfig& cfg, const ConfigMap& map) {
  for (const auto& [key, v] : map) {
    if (key == "batch_size") cfg.batch_size = static_cast<int>(to_int(key, v));
    else if (key == "learning_rate") cfg.learning_rate = to_real(key, v);
    else if (key == "beta1") cfg.beta1 = to_real(key, v);
    else if (key == "beta2") cfg.beta2 = to_real(key, v);
    else if (key == "adam_eps") cfg.adam_eps = to_real(key, v);
    else if (key == "init_std") cfg.init_std = to_real(key, v);
    else if (key == "epochs") cfg.epochs = static_cast<int>(to_int(key, v));
    else if (key == "max_steps") cfg.max_steps = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "image_size") cfg.image_size = static_cast<int>(to_int(key, v));
    else if (key == "train_fraction") cfg.train_fraction = to_real(key, v);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "checkpoint_every") cfg.checkpoint_every = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "patience") cfg.patience = static_cast<int>(to_int(key, v));
    else if (key == "val_eval_cap") cfg.val_eval_cap = static_cast<int>(to_int(key, v));
    else if (key == "lambda_l1") cfg.lambda_l1 = to_real(key, v);
    else if (key == "extractor") cfg.extractor = v;
    else if (key == "extractor_layer") cfg.extractor_layer = v;
    else if (key == "extractor_weights") cfg.extractor_weights = v;
    else if (key == "cache_reference_features") cfg.cache_reference_features = to_bool(key, v);
    else if (key == "stages") cfg.model.stages = static_cast<int>(to_int(key, v));
    else if (key == "channels") cfg.model.channels = static_cast<int>(to_int(key, v));
    else if (key == "inner_channels") cfg.model.inner_channels = static_cast<int>(to_int(key, v));
    else if (key == "weight_sharing") cfg.model.weight_sharing = to_bool(key, v);
    else throw ValidationError("config: unknown training key '" + key + "'");
  }
}

ConfigMap to_config(const TrainConfig& cfg) {
  ConfigMap m;
  m["batch_size"] = std::to_string(cfg.batch_size);
  m["learning_rate"] = real_str(cfg.learning_rate);
  m["beta1"] = real_str(cfg.beta1);
  m["beta2"] = real_str(cfg.beta2);
  m["adam_eps"] = real_str(cfg.adam_eps);
  m["init_std"] = real_str(cfg.init_std);
  m["epochs"] = std::to_string(cfg.epochs);
  m["max_steps"] = std::to_string(cfg.max_steps);
  m["image_size"] = std::to_string(cfg.image_size);
  m["train_fraction"] = real_str(cfg.train_fraction);
  m["seed"] = std::to_string(cfg.seed);
  m["checkpoint_every"] = std::to_string(cfg.checkpoint_every);
  m["patience"] = std::to_string(cfg.patience);
  m["val_eval_cap"] = std::to_string(cfg.val_eval_cap);
  m["lambda_l1"] = real_str(cfg.lambda_l1);
  m["extractor"] = cfg.extractor;
  m["extractor_layer"] = cfg.extractor_layer;
  m["extractor_weights"] = cfg.extractor_weights.string();
  m["cache_reference_features"] = cfg.cache_reference_features ? "true" : "false";
  m["stages"] = std::to_string(cfg.model.stages);
  m["channels"] = std::to_string(cfg.model.channels);
  m["inner_channels"] = std::to_string(cfg.model.inner_channels);
  m["weight_sharing"] = cfg.model.weight_sharing ? "true" : "false";
  return m;
}

void apply_config(SynthesisConfig& cfg, const ConfigMap& map) {
  for (const auto& [key, v] : map) {
    if (key == "thresholds") cfg.thresholds = to_real_list(key, v);
    else if (key == "gamma_min") cfg.gamma_min = to_real(key, v);
    else if (key == "gamma_max") cfg.gamma_max = to_real(key, v);
    else if (key == "luminance_floor") cfg.luminance_floor = to_real(key, v);
    else if (key == "inverse_gamma") cfg.inverse_gamma = to_bool(key, v);
    else if (key == "seed") cfg.rng_seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "image_size") cfg.image_size = static_cast<int>(to_int(key, v));
    else if (key == "save_masks") cfg.save_masks = to_bool(key, v);
    else throw ValidationError("config: unknown synthesis key '" + key + "'");
  }
}

ConfigMap to_config(const SynthesisConfig& cfg) {
  ConfigMap m;
  m["thresholds"] = real_list_str(cfg.thresholds);
  m["gamma_min"] = real_str(cfg.gamma_min);
  m["gamma_max"] = real_str(cfg.gamma_max);
  m["luminance_floor"] = real_str(cfg.luminance_floor);
  m["inverse_gamma"] = cfg.inverse_gamma ? "true" : "false";
  m["seed"] = std::to_string(cfg.rng_seed);
  m["image_size"] = std::to_string(cfg.image_size);
  m["save_masks"] = cfg.save_masks ? "true" : "false";
  return m;
}

}  // namespace nuigo
