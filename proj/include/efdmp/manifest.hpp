// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace efdmp {

// Provenance record written once into every CLI output directory.
struct RunManifest {
  std::string command;
  std::string version;
  std::uint64_t seed = 0;
  nlohmann::json config;   // resolved model config, or null
  nlohmann::json options;  // command options as parsed
  std::vector<std::pair<std::string, std::string>> inputs;  // path, sha256
  std::vector<std::pair<std::string, double>> timings;      // stage, seconds

  nlohmann::json to_json() const;
};

std::string sha256_file(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);

}  // namespace efdmp
