#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dimcollapse/config.hpp"
#include "dimcollapse/errors.hpp"
#include "dimcollapse/experiments.hpp"

namespace {

namespace dc = dimcollapse;

enum Exit : int { ok = 0, usage = 1, config = 2, runtime = 3, io = 4 };

struct Options {
  std::string config_path;
  std::vector<std::string> assignments;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::string spectrum_input;
  bool show_config = false;
};

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("-c,--config", opt.config_path, "Config file of 'key = value' lines")->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", opt.assignments, "Override a config key (key=value); repeatable");
  cmd->add_option("-o,--output-dir", opt.output_dir, "Output directory (overrides config and environment)");
  cmd->add_option("--seed", opt.seed, "Base seed");
  cmd->add_flag("--show-config", opt.show_config, "Print the effective config and exit");
}

dc::config::ExperimentConfig build_config(dc::config::Command command, const Options& opt) {
  auto cfg = opt.config_path.empty() ? dc::config::defaults_for(command)
                                     : dc::config::load_config(opt.config_path, command);
  dc::experiments::apply_environment(cfg);
  for (const auto& a : opt.assignments) dc::config::apply_assignment(cfg, a);
  if (!opt.spectrum_input.empty()) cfg.spectrum_input = opt.spectrum_input;
  if (opt.seed) cfg.seed = *opt.seed;
  if (!opt.output_dir.empty()) cfg.output_dir = opt.output_dir;
  dc::config::validate(cfg);
  return cfg;
}

int execute(dc::config::Command command, const Options& opt) {
  const auto cfg = build_config(command, opt);
  if (opt.show_config) {
    std::fputs(dc::config::serialize(cfg).c_str(), stdout);
    return Exit::ok;
  }
  const auto manifest = dc::experiments::run(cfg);
  std::printf("%s: wrote %zu files to %s (%.2f s)\n", manifest.command.c_str(), manifest.files.size(),
              manifest.output_dir.string().c_str(), manifest.wall_seconds);
  return Exit::ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive-learning collapse laboratory: simulations, probes and spectrum analysis"};
  app.set_version_flag("--version", std::string(dc::experiments::version()));
  app.require_subcommand(1);

  Options opt;
  std::optional<dc::config::Command> chosen;
  struct Sub {
    dc::config::Command command;
    const char* help;
  };
  const std::vector<Sub> subs = {
      {dc::config::Command::sim_single, "One-layer runs over a sweep of augmentation strengths"},
      {dc::config::Command::sim_two_layer, "Two-layer run with alignment, conservation and pairing traces"},
      {dc::config::Command::depth_sweep, "Collapse versus depth, linear and rectifier stacks"},
      {dc::config::Command::directclr_probe, "Sub-vector gradient mask and projector-variant loss traces"},
      {dc::config::Command::spectrum, "Covariance spectrum of an external embedding dump"},
  };
  for (const auto& s : subs) {
    auto* cmd = app.add_subcommand(std::string(dc::config::to_string(s.command)), s.help);
    add_common(cmd, opt);
    if (s.command == dc::config::Command::spectrum) {
      cmd->add_option("file", opt.spectrum_input, "Headerless CSV, one vector per row")->required();
    }
    cmd->callback([&chosen, c = s.command] { chosen = c; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Exit::ok : Exit::usage;
  }

  try {
    return execute(*chosen, opt);
  } catch (const dc::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return Exit::usage;
  } catch (const dc::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return Exit::config;
  } catch (const dc::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return Exit::io;
  } catch (const dc::DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return Exit::runtime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return Exit::runtime;
  }
}
