#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "pcl/align.hpp"
#include "pcl/backend.hpp"
#include "pcl/config.hpp"
#include "pcl/eval.hpp"
#include "pcl/persona.hpp"
#include "pcl/selfplay.hpp"

namespace pcl {

/// A required artifact is missing; the message names the command that produces it.
class PrerequisiteError : public Error {
 public:
  PrerequisiteError(const std::filesystem::path& missing, const std::string& producer)
      : Error("missing " + missing.string() + "; run `pcl " + producer + "` first") {}
};

/// Artifact locations under output_dir.
struct RunLayout {
  std::filesystem::path root;

  std::filesystem::path warmup_dataset() const { return root / "warmup" / "sft.jsonl"; }
  std::filesystem::path warmup_summary() const { return root / "warmup" / "summary.json"; }
  std::filesystem::path sft_checkpoint() const { return root / "sft" / "checkpoint.json"; }
  std::filesystem::path sft_metrics() const { return root / "sft" / "metrics.csv"; }
  std::filesystem::path cspa_dir() const { return root / "cspa"; }
  std::filesystem::path cspa_checkpoint() const { return root / "cspa" / "checkpoint.json"; }
  std::filesystem::path cspa_epoch_checkpoint(std::size_t epoch) const {
    return root / "cspa" / ("checkpoint.epoch-" + std::to_string(epoch) + ".json");
  }
  std::filesystem::path cspa_metrics() const { return root / "cspa" / "metrics.csv"; }
  std::filesystem::path split_manifest() const { return root / "split" / "manifest.json"; }
  std::filesystem::path eval_dir() const { return root / "eval"; }
  std::filesystem::path manifest(const std::string& command) const { return root / "manifests" / (command + ".json"); }
};

struct RunManifest {
  std::string command;
  std::string version;
  std::string config_hash;
  /// Paths as given (relative to output_dir when inside it) mapped to SHA-256.
  std::vector<std::pair<std::string, std::string>> inputs;
  std::vector<std::pair<std::string, std::string>> outputs;
  json summary = json::object();

  json to_json() const;
};

std::string pcl_version();

/// Records for training commands: the train side of the split when a split manifest exists.
std::vector<CorpusRecord> training_records(const RunConfig& cfg);
/// Records for evaluation: the test side of the split when present, otherwise every record.
std::vector<CorpusRecord> evaluation_records(const RunConfig& cfg);

CopTemplate resolve_template(const RunConfig& cfg);

/// Backend factories. With offline set, remote kinds become the synthetic teacher, the overlap
/// judge and the heuristic scorer; mock and stub kinds are kept.
std::unique_ptr<Backend> make_teacher(const RunConfig& cfg, const std::vector<CorpusRecord>& records,
                                      const CopTemplate& tmpl);
std::unique_ptr<Backend> make_judge(const RunConfig& cfg);
std::unique_ptr<Scorer> make_scorer(const RunConfig& cfg);

ToyPolicy initial_policy(const RunConfig& cfg);

struct WarmupOutcome {
  WarmupResult result;
  RunManifest manifest;
};
WarmupOutcome cmd_warmup(const RunConfig& cfg);

struct SftOutcome {
  SftReport report;
  RunManifest manifest;
};
SftOutcome cmd_sft(const RunConfig& cfg);

struct SelfPlayOutcome {
  EpochSummary summary;
  RunManifest manifest;
};
/// Pairs for one epoch from the latest policy: the SFT checkpoint for epoch 1, otherwise the
/// CSPA checkpoint of the previous epoch.
SelfPlayOutcome cmd_selfplay(const RunConfig& cfg, std::size_t epoch);

struct CspaOutcome {
  std::vector<EpochSummary> epochs;
  std::vector<StepMetrics> steps;
  RunManifest manifest;
};
/// For each epoch: regenerate pairs with the current policy, then one DPO pass against the
/// frozen SFT reference.
CspaOutcome cmd_cspa(const RunConfig& cfg);

struct EvalOutcome {
  EvalReport report;
  std::vector<PairwiseVerdict> verdicts;
  RunManifest manifest;
};
EvalOutcome cmd_eval(const RunConfig& cfg);

struct SplitOutcome {
  SplitManifest split;
  RunManifest manifest;
};
SplitOutcome cmd_split(const RunConfig& cfg);

/// Renders report.json files as text tables.
std::string cmd_report(const std::vector<std::filesystem::path>& paths);

}  // namespace pcl
