#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pcl/backend.hpp"
#include "pcl/persona.hpp"

namespace pcl {

inline constexpr std::size_t kMetricCount = 12;
inline constexpr std::array<std::string_view, kMetricCount> kMetricIds = {
    "KE", "KA", "KH", "PB", "PU", "Flu", "Coh", "Cons", "HL", "CS", "ED", "Emp"};

/// Index ranges [begin, end) of each dimension within kMetricIds.
inline constexpr std::size_t kConsistencyEnd = 5;
inline constexpr std::size_t kConversationEnd = 8;

class MetricError : public Error {
 public:
  using Error::Error;
};

/// Throws MetricError for identifiers outside kMetricIds.
std::size_t metric_index(std::string_view id);

struct MetricVector {
  std::array<double, kMetricCount> scores{};

  double operator[](std::string_view id) const { return scores[metric_index(id)]; }

  /// Requires every metric exactly once; rejects unknown ids and non-finite scores.
  static MetricVector from_map(const std::map<std::string, double>& values);
  static MetricVector from_json(const json& j);
  json to_json() const;
  bool operator==(const MetricVector&) const = default;
};

struct DimensionAverages {
  double cc = 0.0;
  double ca = 0.0;
  double ra = 0.0;
  double avg = 0.0;
};

DimensionAverages dimension_averages(const MetricVector& v);
/// Mean of the three dimension averages.
double overall_average(double cc, double ca, double ra);

struct AggregateReport {
  std::size_t n = 0;
  MetricVector means;
  DimensionAverages dims;

  json to_json() const;
};

/// Per-metric means, then dimension averages of those means. Throws on an empty list.
AggregateReport aggregate(const std::vector<MetricVector>& vectors);

// ---------------------------------------------------------------------------
// Pairwise judging

enum class Verdict { Win, Tie, Fail };
std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view s);

struct JudgeChoice {
  int choice = 0;  // 1, 2, or 0 for "equal"
  bool flagged = false;
};

/// First standalone token in {0,1,2}; anything else reads as 0 and is flagged.
JudgeChoice parse_judge_output(std::string_view raw);

/// Pass one shows (A, B); pass two shows (B, A). A verdict is a win only when both passes
/// prefer A's text, a fail only when both prefer B's text, and a tie otherwise.
Verdict resolve_passes(int first_pass, int second_pass);

struct PairwiseVerdict {
  std::string item_id;
  int first_pass = 0;
  int second_pass = 0;
  Verdict resolved = Verdict::Tie;
  bool flagged = false;

  json to_json() const;
  static PairwiseVerdict from_json(const json& j);
  bool operator==(const PairwiseVerdict&) const = default;
};

struct JudgeItem {
  std::string item_id;
  RoleProfile profile;
  DialogueContext context;
  std::string resp_a;
  std::string resp_b;
};

std::string default_judge_template();
std::string build_judge_prompt(const std::string& tmpl, const RoleProfile& profile, const DialogueContext& context,
                               std::string_view response_1, std::string_view response_2);

struct JudgeOptions {
  double temperature = 0.0;
  std::size_t max_tokens = 8;
  std::string system_prompt;
};

PairwiseVerdict judge_pair(Backend& judge, const JudgeItem& item, const std::string& tmpl,
                           const JudgeOptions& options = {});

/// Items fan out under the judge's in-flight cap; verdict i answers item i.
std::vector<PairwiseVerdict> judge_all(Backend& judge, const std::vector<JudgeItem>& items, const std::string& tmpl,
                                       const JudgeOptions& options = {});

struct Tally {
  std::size_t win = 0;
  std::size_t tie = 0;
  std::size_t fail = 0;

  std::size_t total() const { return win + tie + fail; }
  json to_json() const;
  bool operator==(const Tally&) const = default;
};

Tally tally(const std::vector<PairwiseVerdict>& verdicts);
/// Counts each positional pass on its own, read from A's side, so totals are 2 * |verdicts|.
Tally tally_per_pass(const std::vector<PairwiseVerdict>& verdicts);

void write_verdicts(const std::vector<PairwiseVerdict>& verdicts, const std::filesystem::path& path);
std::vector<PairwiseVerdict> read_verdicts(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Metric scoring

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::string name() const = 0;
  virtual std::map<std::string, double> score(const RoleProfile& profile, const DialogueContext& context,
                                              const std::string& response) = 0;
  virtual std::size_t max_in_flight() const { return 1; }
};

class StubScorer final : public Scorer {
 public:
  using Fn = std::function<std::map<std::string, double>(const RoleProfile&, const DialogueContext&,
                                                         const std::string&)>;
  explicit StubScorer(Fn fn, std::string name = "stub") : fn_(std::move(fn)), name_(std::move(name)) {}
  static StubScorer constant(double value);

  std::string name() const override { return name_; }
  std::map<std::string, double> score(const RoleProfile& profile, const DialogueContext& context,
                                      const std::string& response) override {
    return fn_(profile, context, response);
  }

 private:
  Fn fn_;
  std::string name_;
};

struct HttpScorerConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string path = "/score";
  double timeout_s = 30.0;
  std::size_t max_retries = 2;
  double backoff_base_s = 0.5;
  double backoff_ceiling_s = 8.0;
  std::size_t max_in_flight = 4;

  json to_json() const;
  static HttpScorerConfig from_json(const json& j);
};

/// POSTs {profile, dialogue, response} and expects a {metric_id: score} object back.
class HttpScorer final : public Scorer {
 public:
  explicit HttpScorer(HttpScorerConfig cfg) : cfg_(std::move(cfg)) {}
  std::string name() const override { return "http:" + cfg_.base_url; }
  std::map<std::string, double> score(const RoleProfile& profile, const DialogueContext& context,
                                      const std::string& response) override;
  std::size_t max_in_flight() const override { return cfg_.max_in_flight; }

  static json request_body(const RoleProfile& profile, const DialogueContext& context, const std::string& response);

 private:
  HttpScorerConfig cfg_;
};

struct ScoreItem {
  std::string item_id;
  RoleProfile profile;
  DialogueContext context;
  std::string response;
};

struct ScoreResult {
  /// One slot per input item, in order; empty where the scorer failed.
  std::vector<std::optional<MetricVector>> vectors;
  std::size_t missing = 0;
  std::vector<std::string> errors;

  std::vector<MetricVector> present() const;
};

ScoreResult score_responses(Scorer& scorer, const std::vector<ScoreItem>& items);

// ---------------------------------------------------------------------------
// Reports

struct EvalReport {
  std::string system_a;
  std::string system_b;
  std::optional<AggregateReport> scores_a;
  std::optional<AggregateReport> scores_b;
  std::size_t missing_a = 0;
  std::size_t missing_b = 0;
  std::optional<Tally> resolved;
  std::optional<Tally> per_pass;
  std::size_t flagged_passes = 0;

  json to_json() const;
};

/// Text tables: per-metric scores grouped by dimension, the CC/CA/RA/Avg summary, and
/// win/tie/fail counts when present. Values are rounded to three decimals here only.
std::string render_report_tables(const json& report);

}  // namespace pcl
