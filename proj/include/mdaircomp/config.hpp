#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mdaircomp/experiments.hpp"
#include "mdaircomp/feel.hpp"

namespace mdaircomp {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything a CLI run can be configured with. N is always 2^bits.
struct ExperimentConfig {
  FeelConfig feel;
  int rounds = 200;
  int replicates = 1;
  std::vector<Scheme> schemes = {Scheme::IFed, Scheme::PA, Scheme::MDAirComp};

  // detect-bench only
  int trials = 100;
  int blocks = 1;
  int hot_codewords = 0;
  int fixed_active = 0;
  bool distinct = false;

  std::filesystem::path out_dir = "results";

  /// Seed of replicate r: derive_seed(feel.seed, "replicate", r).
  std::uint64_t replicate_seed(int r) const;
  BenchSettings bench_settings() const;
  void validate() const;
};

/// Known keys, in the order they are emitted.
const std::vector<std::string>& config_keys();

/// Sets one key from its text form. Throws ConfigError on an unknown key or a
/// value that does not parse as the key's type.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Flat `key = value` lines; `#` starts a comment; blank lines are ignored.
/// Unknown or repeated keys are errors. Starts from `base`.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

/// Text form of one key's current value, parseable by apply_setting.
std::string setting_text(const ExperimentConfig& cfg, std::string_view key);
/// All keys as `key = value` lines.
std::string to_config_text(const ExperimentConfig& cfg);
/// All keys with typed JSON values (non-finite doubles as strings).
nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace mdaircomp
