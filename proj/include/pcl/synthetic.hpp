#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "pcl/backend.hpp"
#include "pcl/cop.hpp"
#include "pcl/eval.hpp"
#include "pcl/persona.hpp"

namespace pcl {

struct SyntheticCorpusOptions {
  std::size_t n_profiles = 20;
  /// Records are dealt to profiles round-robin, so n_records >= n_profiles covers every profile.
  std::size_t n_records = 20;
  std::size_t history_turns = 3;
  std::uint64_t seed = 0;
  /// Replace every gold response with a unique marker string, for leak tests.
  bool poison_gold = false;
};

inline constexpr std::string_view kPoisonPrefix = "POISON-GOLD-";

/// Personas with Occupation, Personality, Hometown and Catchphrase attributes (Catchphrase last).
Corpus make_synthetic_corpus(const SyntheticCorpusOptions& options);

/// Value of the "Catchphrase" attribute, or "" when absent.
std::string catchphrase_of(const RoleProfile& profile);

/// A well-formed COP output grounded in the record's profile: self-QA over the attributes in
/// order, then a reply that opens with the catchphrase.
std::string compliant_cop_output(const CorpusRecord& record, std::size_t t, const CopMarkers& markers = {});

/// Offline teacher: recognizes prompts built from its records with `tmpl` and answers with the
/// compliant output. Unknown prompts are an error.
class SyntheticTeacher final : public Backend {
 public:
  SyntheticTeacher(const std::vector<CorpusRecord>& records, const CopTemplate& tmpl, const PromptOptions& options = {});
  std::string name() const override { return "synthetic-teacher"; }
  std::vector<ScoredSequence> generate(const GenRequest& req) override;
  std::size_t max_in_flight() const override { return 4; }

 private:
  std::unordered_map<std::string, std::string> answers_;
};

/// Offline judge for prompts built from the default judge template: prefers the response that
/// shares more words with the profile, answers 0 on a tie or when the prompt has an unknown layout.
class OverlapJudge final : public Backend {
 public:
  std::string name() const override { return "overlap-judge"; }
  std::vector<ScoredSequence> generate(const GenRequest& req) override;
  std::size_t max_in_flight() const override { return 4; }
};

/// Fraction of distinct profile-value words (length >= 3) present in the response.
double profile_overlap(const RoleProfile& profile, std::string_view response);

/// Deterministic scorer mapping simple response features onto a 1..5 scale for every metric.
StubScorer heuristic_scorer();

}  // namespace pcl
