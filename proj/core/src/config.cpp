#include "dimcollapse/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dimcollapse/csv.hpp"
#include "dimcollapse/errors.hpp"

namespace dimcollapse::config {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double to_real(std::string_view v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end || v.empty()) throw ConfigError("expected a real number, got '" + std::string(v) + "'");
  return out;
}

template <typename Int>
Int to_integer(std::string_view v) {
  Int out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end || v.empty()) throw ConfigError("expected an integer, got '" + std::string(v) + "'");
  return out;
}

bool to_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected a boolean, got '" + std::string(v) + "'");
}

std::string unquote(std::string_view v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return std::string(v.substr(1, v.size() - 2));
  return std::string(v);
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += fmt(items[i]);
  }
  return out;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Key {
  std::string name;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

const std::vector<Key>& key_table() {
  using C = ExperimentConfig;
  static const std::vector<Key> keys = {
      {"command", [](const C& c) { return std::string(to_string(c.command)); },
       [](C& c, std::string_view v) { c.command = parse_command(v); }},
      {"seed", [](const C& c) { return std::to_string(c.seed); },
       [](C& c, std::string_view v) { c.seed = to_integer<std::uint64_t>(v); }},
      {"output_dir", [](const C& c) { return "\"" + c.output_dir.string() + "\""; },
       [](C& c, std::string_view v) { c.output_dir = unquote(v); }},
      {"data.dim", [](const C& c) { return std::to_string(c.data.dim); },
       [](C& c, std::string_view v) { c.data.dim = c.aug.dim = to_integer<int>(v); }},
      {"data.scale", [](const C& c) { return csv::format_real(c.data.scale); },
       [](C& c, std::string_view v) { c.data.scale = to_real(v); }},
      {"aug.block_start", [](const C& c) { return std::to_string(c.aug.block_start); },
       [](C& c, std::string_view v) { c.aug.block_start = to_integer<int>(v); }},
      {"aug.block_size", [](const C& c) { return std::to_string(c.aug.block_size); },
       [](C& c, std::string_view v) { c.aug.block_size = to_integer<int>(v); }},
      {"aug.amplitude", [](const C& c) { return csv::format_real(c.aug.amplitude); },
       [](C& c, std::string_view v) { c.aug.amplitude = to_real(v); }},
      {"aug.sweep", [](const C& c) { return join(c.amplitude_sweep, csv::format_real); },
       [](C& c, std::string_view v) {
         c.amplitude_sweep.clear();
         for (auto item : split_list(v)) c.amplitude_sweep.push_back(to_real(item));
       }},
      {"init.mode", [](const C& c) { return std::string(models::to_string(c.init.mode)); },
       [](C& c, std::string_view v) { c.init.mode = models::parse_init_mode(v); }},
      {"init.sv_min", [](const C& c) { return csv::format_real(c.init.sv_min); },
       [](C& c, std::string_view v) { c.init.sv_min = to_real(v); }},
      {"init.sv_max", [](const C& c) { return csv::format_real(c.init.sv_max); },
       [](C& c, std::string_view v) { c.init.sv_max = to_real(v); }},
      {"model.depth", [](const C& c) { return std::to_string(c.depth); },
       [](C& c, std::string_view v) { c.depth = to_integer<int>(v); }},
      {"model.nonlinearity", [](const C& c) { return std::string(models::to_string(c.nonlinearity)); },
       [](C& c, std::string_view v) { c.nonlinearity = models::parse_nonlinearity(v); }},
      {"flow.learning_rate", [](const C& c) { return csv::format_real(c.flow.learning_rate); },
       [](C& c, std::string_view v) { c.flow.learning_rate = to_real(v); }},
      {"flow.steps", [](const C& c) { return std::to_string(c.flow.steps); },
       [](C& c, std::string_view v) { c.flow.steps = to_integer<long>(v); }},
      {"flow.batch_size", [](const C& c) { return std::to_string(c.flow.batch_size); },
       [](C& c, std::string_view v) { c.flow.batch_size = to_integer<int>(v); }},
      {"flow.resample", [](const C& c) { return fmt_bool(c.flow.resample); },
       [](C& c, std::string_view v) { c.flow.resample = to_bool(v); }},
      {"flow.record_every", [](const C& c) { return std::to_string(c.flow.record_every); },
       [](C& c, std::string_view v) { c.flow.record_every = to_integer<long>(v); }},
      {"flow.normalize", [](const C& c) { return fmt_bool(c.flow.normalize_embeddings); },
       [](C& c, std::string_view v) { c.flow.normalize_embeddings = to_bool(v); }},
      {"sweep.depths", [](const C& c) { return join(c.depths, [](int d) { return std::to_string(d); }); },
       [](C& c, std::string_view v) {
         c.depths.clear();
         for (auto item : split_list(v)) c.depths.push_back(to_integer<int>(item));
       }},
      {"sweep.nonlinearities",
       [](const C& c) {
         return join(c.nonlinearities, [](models::Nonlinearity n) { return std::string(models::to_string(n)); });
       },
       [](C& c, std::string_view v) {
         c.nonlinearities.clear();
         for (auto item : split_list(v)) c.nonlinearities.push_back(models::parse_nonlinearity(item));
       }},
      {"directclr.rep_dim", [](const C& c) { return std::to_string(c.rep_dim); },
       [](C& c, std::string_view v) { c.rep_dim = to_integer<int>(v); }},
      {"directclr.d0", [](const C& c) { return std::to_string(c.d0); },
       [](C& c, std::string_view v) { c.d0 = to_integer<int>(v); }},
      {"directclr.variants",
       [](const C& c) {
         return join(c.variants, [](directclr::ProjectorVariant p) { return std::string(directclr::to_string(p)); });
       },
       [](C& c, std::string_view v) {
         c.variants.clear();
         for (auto item : split_list(v)) c.variants.push_back(directclr::parse_projector_variant(item));
       }},
      {"analysis.epsilon", [](const C& c) { return csv::format_real(c.epsilon); },
       [](C& c, std::string_view v) { c.epsilon = to_real(v); }},
      {"analysis.eval_batch_size", [](const C& c) { return std::to_string(c.eval_batch_size); },
       [](C& c, std::string_view v) { c.eval_batch_size = to_integer<int>(v); }},
      {"spectrum.input", [](const C& c) { return "\"" + c.spectrum_input.string() + "\""; },
       [](C& c, std::string_view v) { c.spectrum_input = unquote(v); }},
  };
  return keys;
}

const Key& find_key(std::string_view name) {
  for (const auto& k : key_table()) {
    if (k.name == name) return k;
  }
  throw ConfigError("unknown key '" + std::string(name) + "'");
}

void set_key(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  try {
    find_key(key).set(cfg, value);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  } catch (const Error& e) {
    // Enum parsers in other modules throw their own error types.
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

void require(bool ok, const char* key, const std::string& why) {
  if (!ok) throw ConfigError(std::string(key) + ": " + why);
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

std::string_view to_string(Command c) {
  switch (c) {
    case Command::sim_single: return "sim-single";
    case Command::sim_two_layer: return "sim-two-layer";
    case Command::depth_sweep: return "depth-sweep";
    case Command::directclr_probe: return "directclr-probe";
    case Command::spectrum: return "spectrum";
  }
  return "unknown";
}

const std::vector<Command>& all_commands() {
  static const std::vector<Command> all = {Command::sim_single, Command::sim_two_layer, Command::depth_sweep,
                                           Command::directclr_probe, Command::spectrum};
  return all;
}

Command parse_command(std::string_view s) {
  for (const auto c : all_commands()) {
    if (to_string(c) == s) return c;
  }
  throw ConfigError("unknown command '" + std::string(s) + "'");
}

ExperimentConfig defaults_for(Command command) {
  ExperimentConfig c;
  c.command = command;
  c.amplitude_sweep = {0.1, 0.5, 1.0, 2.0, 4.0};
  c.depths = {1, 2, 3};
  c.nonlinearities = {models::Nonlinearity::none, models::Nonlinearity::rectifier};
  c.variants = directclr::all_projector_variants();
  c.flow.learning_rate = 1e-2;
  c.flow.batch_size = 512;
  c.flow.resample = true;
  switch (command) {
    case Command::sim_single:
      c.depth = 1;
      c.flow.steps = 3000;
      c.flow.record_every = 50;
      break;
    case Command::sim_two_layer:
      // Small, nearly isotropic init with weak augmentation: the regime in
      // which adjacent layers align before the loss saturates.
      c.depth = 2;
      c.data.scale = 2.0;
      c.init.sv_min = 0.027;
      c.init.sv_max = 0.03;
      c.flow.steps = 14000;
      c.flow.record_every = 200;
      break;
    case Command::depth_sweep:
      c.flow.steps = 3000;
      c.flow.batch_size = 256;
      c.flow.record_every = 100;
      break;
    case Command::directclr_probe:
      c.aug.amplitude = 1.0;
      c.flow.learning_rate = 0.1;
      c.flow.steps = 300;
      c.flow.batch_size = 256;
      c.flow.record_every = 300;
      break;
    case Command::spectrum:
      break;
  }
  return c;
}

void validate(const ExperimentConfig& c) {
  require(!c.output_dir.empty(), "output_dir", "must not be empty");
  require(c.data.dim >= 2, "data.dim", "must be >= 2");
  require(finite(c.data.scale) && c.data.scale > 0.0, "data.scale", "must be finite and > 0");
  require(c.aug.dim == c.data.dim, "data.dim", "augmentation dim out of sync");
  require(c.aug.block_start >= 0 && c.aug.block_start < c.data.dim, "aug.block_start", "must lie in [0, data.dim)");
  require(c.aug.block_size >= 1 && c.aug.block_start + c.aug.block_size <= c.data.dim, "aug.block_size",
          "block must be non-empty and fit inside data.dim");
  require(finite(c.aug.amplitude) && c.aug.amplitude >= 0.0, "aug.amplitude", "must be finite and >= 0");
  require(!c.amplitude_sweep.empty(), "aug.sweep", "must list at least one amplitude");
  for (const double k : c.amplitude_sweep) require(finite(k) && k >= 0.0, "aug.sweep", "amplitudes must be >= 0");
  require(finite(c.init.sv_min) && c.init.sv_min > 0.0, "init.sv_min", "must be > 0");
  require(finite(c.init.sv_max) && c.init.sv_max > c.init.sv_min, "init.sv_max", "must exceed init.sv_min");
  require(c.depth >= 1, "model.depth", "must be >= 1");
  require(finite(c.flow.learning_rate) && c.flow.learning_rate >= 0.0, "flow.learning_rate", "must be finite and >= 0");
  require(c.flow.steps >= 1, "flow.steps", "must be >= 1");
  require(c.flow.batch_size >= 2, "flow.batch_size", "must be >= 2");
  require(c.flow.record_every >= 1, "flow.record_every", "must be >= 1");
  require(!c.depths.empty(), "sweep.depths", "must list at least one depth");
  for (const int d : c.depths) require(d >= 1, "sweep.depths", "depths must be >= 1");
  require(!c.nonlinearities.empty(), "sweep.nonlinearities", "must list at least one mode");
  require(c.rep_dim >= 1, "directclr.rep_dim", "must be >= 1");
  require(c.d0 >= 1 && c.d0 <= c.rep_dim, "directclr.d0", "must lie in [1, directclr.rep_dim]");
  require(!c.variants.empty(), "directclr.variants", "must list at least one variant");
  require(c.epsilon > 0.0 && c.epsilon < 1.0, "analysis.epsilon", "must lie in (0, 1)");
  require(c.eval_batch_size >= 2, "analysis.eval_batch_size", "must be >= 2");
  if (c.command == Command::spectrum) require(!c.spectrum_input.empty(), "spectrum.input", "required by spectrum");
}

ExperimentConfig parse_config(std::string_view text, std::optional<Command> command_override) {
  struct Entry {
    std::string key;
    std::string value;
    int line;
  };
  std::vector<Entry> entries;
  std::map<std::string, int> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": missing key");
    try {
      find_key(key);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (const auto it = seen.find(key); it != seen.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "' (first on line " +
                        std::to_string(it->second) + ")");
    }
    seen.emplace(key, line_no);
    entries.push_back({std::move(key), std::string(value), line_no});
  }

  Command command = Command::sim_single;
  for (const auto& e : entries) {
    if (e.key != "command") continue;
    try {
      command = parse_command(e.value);
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(e.line) + ": command: " + err.what());
    }
  }
  if (command_override) command = *command_override;

  ExperimentConfig cfg = defaults_for(command);
  for (const auto& e : entries) {
    if (e.key == "command") continue;
    try {
      set_key(cfg, e.key, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(e.line) + ": " + err.what());
    }
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<Command> command_override) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), command_override);
}

void apply_assignment(ExperimentConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  const auto key = trim(assignment.substr(0, eq));
  if (key == "command") throw ConfigError("command: cannot be overridden by an assignment");
  set_key(cfg, key, trim(assignment.substr(eq + 1)));
  validate(cfg);
}

std::string serialize(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& k : key_table()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& k : key_table()) v.push_back(k.name);
    return v;
  }();
  return names;
}

}  // namespace dimcollapse::config
