#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pcl/util.hpp"

namespace pcl {

using Attribute = std::pair<std::string, std::string>;

/// A character profile. The ablated profile keeps its role name but carries no attributes and
/// has `ablated` set, so the distinction from "a profile that happens to be empty" survives
/// serialization.
struct RoleProfile {
  std::string role_name;
  std::vector<Attribute> attributes;
  bool ablated = false;

  static RoleProfile empty_for(std::string role_name);

  bool operator==(const RoleProfile&) const = default;
};

struct Utterance {
  std::string speaker;
  std::string text;
  std::size_t index = 0;

  bool operator==(const Utterance&) const = default;
};

struct DialogueContext {
  std::string context_id;
  std::vector<Utterance> utterances;
  std::string target_role;

  bool operator==(const DialogueContext&) const = default;
};

struct CorpusRecord {
  DialogueContext context;
  RoleProfile profile;
  // Only the baseline SFT comparison path may look at this.
  std::optional<Utterance> gold_response;

  bool operator==(const CorpusRecord&) const = default;
};

class CorpusError : public Error {
 public:
  CorpusError(std::size_t line, std::string field, const std::string& what);
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

struct Corpus {
  std::vector<CorpusRecord> records;
  /// Distinct profiles keyed by role name, in first-appearance order.
  std::vector<RoleProfile> profiles;
  std::vector<std::string> warnings;

  std::size_t profile_count() const { return profiles.size(); }
};

Corpus parse_corpus(std::string_view jsonl_text);
Corpus load_corpus(const std::filesystem::path& path);

json record_to_json(const CorpusRecord& record);
CorpusRecord record_from_json(const json& row, std::size_t line_no, std::vector<std::string>* warnings = nullptr);
std::string serialize_corpus(const std::vector<CorpusRecord>& records);

/// "key: value" lines in attribute order; the ablated profile renders as "".
/// Backslash, newline and ':' in keys and backslash/newline in values are escaped so distinct
/// attribute lists never render to the same text.
std::string render_profile(const RoleProfile& profile);

struct SplitManifest {
  std::uint64_t seed = 0;
  std::vector<std::string> train_profiles;
  std::vector<std::string> test_profiles;

  json to_json() const;
  static SplitManifest from_json(const json& j);
  bool operator==(const SplitManifest&) const = default;
};

struct TransferSplit {
  std::vector<CorpusRecord> train;
  std::vector<CorpusRecord> test;
  SplitManifest manifest;
};

/// Partitions profiles uniformly at random (no stratification by dialogue count).
TransferSplit transfer_split(const std::vector<CorpusRecord>& records, std::size_t n_train_profiles,
                             std::uint64_t seed);

/// Applies a previously materialized manifest. Records whose role is absent from both sides are dropped.
TransferSplit apply_split(const std::vector<CorpusRecord>& records, const SplitManifest& manifest);

}  // namespace pcl
