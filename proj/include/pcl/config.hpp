#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pcl/align.hpp"
#include "pcl/util.hpp"

namespace pcl {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct BackendSpec {
  /// teacher: synthetic | remote | mock; judge: overlap | remote | mock; scorer: heuristic | http | constant.
  std::string kind;
  json options = json::object();

  json to_json() const { return {{"kind", kind}, {"options", options}}; }
  static BackendSpec from_json(const json& j);
};

struct RunConfig {
  std::filesystem::path corpus;
  std::filesystem::path output_dir = "runs/default";
  std::string template_id = "pcl-default";
  std::filesystem::path template_manifest;
  std::size_t chain_length = 5;
  std::size_t max_prompt_tokens = 0;
  std::uint64_t seed = 0;
  bool offline = false;

  struct Warmup {
    std::size_t points = 1000;
    double temperature = 1.0;
    std::size_t max_tokens = 1024;
    std::string system_prompt;
  } warmup;

  struct SelfPlay {
    double temperature = 0.7;
    std::size_t max_tokens = 256;
    bool strict = false;
    std::size_t oversample = 1;
    std::string system_prompt;
  } selfplay;

  struct Policy {
    /// Byte alphabet of the toy policy. Empty means 7-bit ASCII, which keeps sampled text valid
    /// UTF-8 for the JSONL artifacts; "bytes" means all 256 values.
    std::string alphabet;
    double init_scale = 0.0;
    std::size_t max_in_flight = 4;
  } policy;

  struct Split {
    std::size_t train_profiles = 60;
  } split;

  struct Eval {
    /// "sft", "cspa", or a checkpoint path.
    std::string system_a = "cspa";
    std::string system_b = "sft";
    std::size_t max_items = 0;
    std::filesystem::path judge_template;
    double judge_temperature = 0.0;
    double temperature = 0.7;
    std::size_t max_tokens = 256;
  } eval;

  BackendSpec teacher{"remote", json::object()};
  BackendSpec judge{"remote", json::object()};
  BackendSpec scorer{"http", json::object()};

  TrainConfig sft = TrainConfig::defaults(Stage::CopSft);
  TrainConfig cspa = TrainConfig::defaults(Stage::Cspa);

  json to_json() const;
  /// Strict: unknown keys anywhere in the document are rejected.
  static RunConfig from_json(const json& j);
  /// Hash of the effective configuration without output_dir, so relocated runs agree.
  std::string hash() const;
};

/// Parses a TOML (.toml) or JSON (any other extension) document into JSON.
json read_config_document(const std::filesystem::path& path);
json toml_to_json(std::string_view toml_text);

/// Applies "a.b_c=value" (value parsed as JSON when possible, else taken as a string).
void apply_override(json& doc, std::string_view assignment);

/// Defaults, then the file (if any), then overrides in order. Relative paths in the file resolve
/// against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

}  // namespace pcl
