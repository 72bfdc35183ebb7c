#pragma once

// Run configuration: a small TOML subset (sections, key = value, strings,
// booleans, integers, floats including inf/nan, and nested arrays), schema
// validation, and the canonical form behind the config hash.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "robandit/sim_env.hpp"

namespace robandit::cli {

struct Value {
  enum class Kind { kBool, kInt, kFloat, kString, kArray };
  Kind kind = Kind::kInt;
  bool boolean = false;
  std::int64_t integer = 0;
  double real = 0.0;
  std::string text;
  std::vector<Value> items;

  /// Numeric value; integers widen to double.
  double as_double() const;
};

using Section = std::map<std::string, Value>;

struct ConfigDocument {
  std::map<std::string, Section> sections;
};

/// Throws ConfigError with the offending line number.
ConfigDocument parse_config(std::string_view text);
ConfigDocument load_config(const std::filesystem::path& path);

struct OracleSettings {
  int mc_samples = 100000;
  std::uint64_t mc_seed = 7;
  std::string cache_dir = ".robandit_cache";
};

struct RunSettings {
  ExperimentConfig experiment;
  OracleSettings oracle;
  std::string output_dir = "results";
};

/// Validates every section and key against the schema; unknown keys and
/// wrongly typed values throw ConfigError.
RunSettings build_settings(const ConfigDocument& doc);

/// Text form of every setting that affects results (parallelism and the
/// output directory are excluded).
std::string canonical_config(const RunSettings& settings);

/// 16 hex digits of FNV-1a over canonical_config.
std::string config_hash(const RunSettings& settings);

nlohmann::json settings_to_json(const RunSettings& settings);

/// Applies ROBANDIT_SEED when set; throws ConfigError when it is not an integer.
void apply_seed_environment(RunSettings& settings);

}  // namespace robandit::cli
