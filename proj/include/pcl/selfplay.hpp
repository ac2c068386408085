#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "pcl/backend.hpp"
#include "pcl/cop.hpp"
#include "pcl/datasets.hpp"
#include "pcl/persona.hpp"

namespace pcl {

struct WarmupOptions {
  std::string system_prompt;
  double temperature = 1.0;
  std::size_t max_tokens = 1024;
  std::uint64_t seed = 0;
  PromptOptions prompt;
};

struct WarmupResult {
  std::vector<SftExample> examples;
  std::size_t requested = 0;
  /// Teacher outputs that did not parse in the expected format.
  std::size_t filtered = 0;
  /// Teacher calls that raised.
  std::size_t failed = 0;
  std::vector<std::string> errors;

  std::size_t shortfall() const { return requested - examples.size(); }
  json summary() const;
};

/// Samples n_points records without replacement (seeded), asks the teacher for COP outputs and
/// keeps those that parse. Throws when nothing survives.
WarmupResult generate_warmup(const std::vector<CorpusRecord>& records, Backend& teacher, std::size_t n_points,
                             const CopTemplate& tmpl, const WarmupOptions& options = {});

struct SamplerOptions {
  std::string system_prompt;
  double temperature = 0.7;
  std::size_t max_tokens = 256;
  std::uint64_t seed = 0;
  /// Treat a pair as degenerate when either side fails to parse. Otherwise such pairs are kept
  /// and flagged through chosen_parsed / rejected_parsed.
  bool strict = false;
  /// Pairs attempted per record per epoch.
  std::size_t oversample = 1;
  PromptOptions prompt;
};

struct Degenerate {
  std::string context_id;
  std::string reason;
};

using PairOutcome = std::variant<PreferencePair, Degenerate>;

struct PairSeeds {
  std::uint64_t chosen;
  std::uint64_t rejected;
};

PairSeeds pair_seeds(std::uint64_t run_seed, std::string_view context_id, std::size_t epoch, std::size_t draw);

/// y+ from COP(P, C_n), y- from COP(empty, C_n); the pair is keyed on the persona-present prompt.
PairOutcome sample_pair(const CorpusRecord& record, Backend& policy, const CopTemplate& tmpl,
                        const SamplerOptions& options = {}, std::size_t epoch = 1, std::size_t draw = 0);

struct EpochSummary {
  std::filesystem::path path;
  std::size_t epoch = 0;
  std::size_t attempted = 0;
  std::size_t written = 0;
  std::size_t degenerate = 0;
  std::size_t failed = 0;
  std::size_t chosen_unparsed = 0;
  std::size_t rejected_unparsed = 0;
  std::vector<std::string> errors;
  std::vector<PreferencePair> pairs;

  json summary() const;
};

std::filesystem::path pair_file_path(const std::filesystem::path& out_dir, std::size_t epoch);

/// Pairs for every record with the current policy, written to out_dir/pairs.epoch-K.jsonl in input order.
EpochSummary run_epoch_generation(const std::vector<CorpusRecord>& records, Backend& policy, std::size_t epoch,
                                  const CopTemplate& tmpl, const std::filesystem::path& out_dir,
                                  const SamplerOptions& options = {});

}  // namespace pcl
