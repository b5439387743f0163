#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dimcollapse/directclr.hpp"
#include "dimcollapse/dynamics.hpp"
#include "dimcollapse/models.hpp"
#include "dimcollapse/synthdata.hpp"

namespace dimcollapse::config {

enum class Command { sim_single, sim_two_layer, depth_sweep, directclr_probe, spectrum };

std::string_view to_string(Command c);
// Throws ConfigError for unknown names.
Command parse_command(std::string_view s);
const std::vector<Command>& all_commands();

// Flat configuration shared by every command. aug.dim always equals data.dim.
// flow.seed and init.seed are derived from `seed` when a run starts.
struct ExperimentConfig {
  Command command = Command::sim_single;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";

  synthdata::DataSpec data;
  synthdata::AugmentationSpec aug;
  std::vector<double> amplitude_sweep;

  models::InitSpec init;
  int depth = 1;
  models::Nonlinearity nonlinearity = models::Nonlinearity::none;
  dynamics::FlowConfig flow;

  std::vector<int> depths;
  std::vector<models::Nonlinearity> nonlinearities;

  int rep_dim = 32;
  int d0 = 8;
  std::vector<directclr::ProjectorVariant> variants;

  double epsilon = 1e-3;
  int eval_batch_size = 2048;
  std::filesystem::path spectrum_input;

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig defaults_for(Command command);

// Parses `key = value` lines; blank lines and lines starting with '#' are
// ignored. Defaults come from the file's `command` key, or `command_override`
// when given. Unknown keys, duplicates and malformed values raise ConfigError
// with the line number; invalid values raise ConfigError naming the key.
ExperimentConfig parse_config(std::string_view text, std::optional<Command> command_override = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<Command> command_override = std::nullopt);

// Applies a single `key=value` assignment on top of a parsed config.
void apply_assignment(ExperimentConfig& cfg, std::string_view assignment);

// Throws ConfigError naming the first offending key.
void validate(const ExperimentConfig& cfg);

// Every key, in a fixed order; parse_config(serialize(c)) == c.
std::string serialize(const ExperimentConfig& cfg);

const std::vector<std::string>& known_keys();

}  // namespace dimcollapse::config
