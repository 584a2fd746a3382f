// SPDX-License-Identifier: Apache-2.0
#include "nuigo/manifest.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nuigo/common.hpp"

namespace nuigo {

namespace fs = std::filesystem;

namespace {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void save_manifest(const fs::path& file, const SampleManifest& manifest) {
  fs::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out << "clean_id,degraded_id,threshold,gamma,seed\n";
    for (const auto& e : manifest.entries) {
      out << e.clean_id << ',' << e.degraded_id << ',' << format_real(e.threshold)
          << ',' << format_real(e.gamma) << ',' << e.seed << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, file);
}

SampleManifest load_manifest(const fs::path& file) {
  std::ifstream in(file);
  require(static_cast<bool>(in), "cannot open manifest: " + file.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "empty manifest: " + file.string());
  require(line == "clean_id,degraded_id,threshold,gamma,seed",
          "unexpected manifest header in " + file.string());

  SampleManifest manifest;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    ManifestEntry e;
    std::string threshold, gamma, seed;
    if (!std::getline(ss, e.clean_id, ',') || !std::getline(ss, e.degraded_id, ',') ||
        !std::getline(ss, threshold, ',') || !std::getline(ss, gamma, ',') ||
        !std::getline(ss, seed)) {
      throw ValidationError("malformed manifest row at line " + std::to_string(lineno));
    }
    try {
      e.threshold = std::stod(threshold);
      e.gamma = std::stod(gamma);
      e.seed = std::stoull(seed);
    } catch (const std::exception&) {
      throw ValidationError("malformed manifest number at line " + std::to_string(lineno));
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

}  // namespace nuigo
