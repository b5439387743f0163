#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dimcollapse/config.hpp"

namespace dimcollapse::experiments {

inline constexpr const char* kOutputDirEnv = "DIMCOLLAPSE_OUTPUT_DIR";

std::string_view version();

struct EmittedFile {
  std::string path;  // relative to the output directory, '/' separated
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string command;
  std::string version;
  std::string config_text;
  double wall_seconds = 0.0;
  std::filesystem::path output_dir;
  std::vector<EmittedFile> files;
};

// Replaces cfg.output_dir with the environment override when it is set and non-empty.
void apply_environment(config::ExperimentConfig& cfg);

// Runs the configured command, writes its CSVs and manifest.json into
// cfg.output_dir and returns the manifest. Identical configs produce
// byte-identical CSVs; only manifest.json carries timing.
RunManifest run(const config::ExperimentConfig& cfg);

// Lower-case hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace dimcollapse::experiments
