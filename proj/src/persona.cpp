#include "pcl/persona.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace pcl {

namespace {

constexpr std::string_view kKnownFields[] = {"context_id", "role_name", "profile", "turns", "gold_response"};

std::string escape(std::string_view s, bool escape_colon) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case ':':
        if (escape_colon) {
          out += "\\:";
        } else {
          out += c;
        }
        break;
      default: out += c;
    }
  }
  return out;
}

const json& require(const json& row, const char* field, std::size_t line_no) {
  auto it = row.find(field);
  if (it == row.end()) throw CorpusError(line_no, field, "missing field");
  return *it;
}

std::string require_string(const json& j, const char* field, std::size_t line_no) {
  if (!j.is_string()) throw CorpusError(line_no, field, "expected string");
  return j.get<std::string>();
}

Utterance utterance_from_json(const json& j, const char* field, std::size_t line_no, std::size_t index) {
  if (!j.is_object()) throw CorpusError(line_no, field, "expected object with speaker and text");
  Utterance u;
  u.speaker = require_string(require(j, "speaker", line_no), field, line_no);
  u.text = require_string(require(j, "text", line_no), field, line_no);
  if (trim(u.text).empty()) throw CorpusError(line_no, field, "empty utterance text");
  u.index = index;
  return u;
}

}  // namespace

RoleProfile RoleProfile::empty_for(std::string role_name) {
  RoleProfile p;
  p.role_name = std::move(role_name);
  p.ablated = true;
  return p;
}

CorpusError::CorpusError(std::size_t line, std::string field, const std::string& what)
    : Error("line " + std::to_string(line) + ", field '" + field + "': " + what), line_(line), field_(std::move(field)) {}

CorpusRecord record_from_json(const json& row, std::size_t line_no, std::vector<std::string>* warnings) {
  if (!row.is_object()) throw CorpusError(line_no, "<record>", "expected a JSON object");
  CorpusRecord rec;
  rec.context.context_id = require_string(require(row, "context_id", line_no), "context_id", line_no);
  if (rec.context.context_id.empty()) throw CorpusError(line_no, "context_id", "empty id");
  rec.profile.role_name = require_string(require(row, "role_name", line_no), "role_name", line_no);
  if (rec.profile.role_name.empty()) throw CorpusError(line_no, "role_name", "empty role name");
  rec.context.target_role = rec.profile.role_name;

  const json& profile = require(row, "profile", line_no);
  if (profile.is_null()) {
    rec.profile.ablated = true;
  } else if (profile.is_array()) {
    for (const auto& kv : profile) {
      if (!kv.is_array() || kv.size() != 2 || !kv[0].is_string() || !kv[1].is_string())
        throw CorpusError(line_no, "profile", "expected [key, value] string pairs");
      rec.profile.attributes.emplace_back(kv[0].get<std::string>(), kv[1].get<std::string>());
    }
  } else {
    throw CorpusError(line_no, "profile", "expected array of [key, value] pairs or null");
  }

  const json& turns = require(row, "turns", line_no);
  if (!turns.is_array()) throw CorpusError(line_no, "turns", "expected array");
  if (turns.empty()) throw CorpusError(line_no, "turns", "empty dialogue");
  for (const auto& t : turns)
    rec.context.utterances.push_back(utterance_from_json(t, "turns", line_no, rec.context.utterances.size()));

  if (auto it = row.find("gold_response"); it != row.end() && !it->is_null()) {
    Utterance gold = utterance_from_json(*it, "gold_response", line_no, rec.context.utterances.size());
    if (gold.speaker != rec.profile.role_name)
      throw CorpusError(line_no, "gold_response", "speaker '" + gold.speaker + "' is not the target role");
    rec.gold_response = std::move(gold);
  }

  if (warnings) {
    for (const auto& [key, _] : row.items()) {
      if (std::find(std::begin(kKnownFields), std::end(kKnownFields), key) == std::end(kKnownFields))
        warnings->push_back("line " + std::to_string(line_no) + ": unknown field '" + key + "' ignored");
    }
  }
  return rec;
}

json record_to_json(const CorpusRecord& record) {
  json row;
  row["context_id"] = record.context.context_id;
  row["role_name"] = record.profile.role_name;
  if (record.profile.ablated) {
    row["profile"] = nullptr;
  } else {
    json attrs = json::array();
    for (const auto& [k, v] : record.profile.attributes) attrs.push_back({k, v});
    row["profile"] = std::move(attrs);
  }
  json turns = json::array();
  for (const auto& u : record.context.utterances) turns.push_back({{"speaker", u.speaker}, {"text", u.text}});
  row["turns"] = std::move(turns);
  if (record.gold_response)
    row["gold_response"] = {{"speaker", record.gold_response->speaker}, {"text", record.gold_response->text}};
  return row;
}

std::string serialize_corpus(const std::vector<CorpusRecord>& records) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(record_to_json(r));
  return to_jsonl(rows);
}

Corpus parse_corpus(std::string_view jsonl_text) {
  Corpus corpus;
  std::unordered_set<std::string> ids;
  std::unordered_map<std::string, std::size_t> profile_index;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(jsonl_text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorpusError(line_no, "<record>", std::string("malformed JSON: ") + e.what());
    }
    CorpusRecord rec = record_from_json(row, line_no, &corpus.warnings);
    if (!ids.insert(rec.context.context_id).second)
      throw CorpusError(line_no, "context_id", "duplicate context_id '" + rec.context.context_id + "'");
    auto [it, inserted] = profile_index.try_emplace(rec.profile.role_name, corpus.profiles.size());
    if (inserted) {
      corpus.profiles.push_back(rec.profile);
    } else if (!(corpus.profiles[it->second] == rec.profile)) {
      throw CorpusError(line_no, "profile", "conflicting profile for role '" + rec.profile.role_name + "'");
    }
    corpus.records.push_back(std::move(rec));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) { return parse_corpus(read_file(path)); }

std::string render_profile(const RoleProfile& profile) {
  if (profile.ablated) return {};
  std::string out;
  for (std::size_t i = 0; i < profile.attributes.size(); ++i) {
    if (i) out += '\n';
    out += escape(profile.attributes[i].first, true);
    out += ": ";
    out += escape(profile.attributes[i].second, false);
  }
  return out;
}

json SplitManifest::to_json() const {
  return {{"seed", seed}, {"train_profiles", train_profiles}, {"test_profiles", test_profiles}};
}

SplitManifest SplitManifest::from_json(const json& j) {
  SplitManifest m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.train_profiles = j.at("train_profiles").get<std::vector<std::string>>();
  m.test_profiles = j.at("test_profiles").get<std::vector<std::string>>();
  return m;
}

TransferSplit apply_split(const std::vector<CorpusRecord>& records, const SplitManifest& manifest) {
  const std::set<std::string> train(manifest.train_profiles.begin(), manifest.train_profiles.end());
  const std::set<std::string> test(manifest.test_profiles.begin(), manifest.test_profiles.end());
  TransferSplit split;
  split.manifest = manifest;
  for (const auto& r : records) {
    if (train.count(r.profile.role_name)) {
      split.train.push_back(r);
    } else if (test.count(r.profile.role_name)) {
      split.test.push_back(r);
    }
  }
  return split;
}

TransferSplit transfer_split(const std::vector<CorpusRecord>& records, std::size_t n_train_profiles,
                             std::uint64_t seed) {
  std::vector<std::string> names;
  std::unordered_set<std::string> seen;
  for (const auto& r : records)
    if (seen.insert(r.profile.role_name).second) names.push_back(r.profile.role_name);
  if (n_train_profiles >= names.size())
    throw Error("n_train_profiles (" + std::to_string(n_train_profiles) + ") must be less than the profile count (" +
                std::to_string(names.size()) + ")");

  const auto perm = seeded_permutation(names.size(), seed);
  SplitManifest manifest;
  manifest.seed = seed;
  for (std::size_t i = 0; i < perm.size(); ++i)
    (i < n_train_profiles ? manifest.train_profiles : manifest.test_profiles).push_back(names[perm[i]]);
  std::sort(manifest.train_profiles.begin(), manifest.train_profiles.end());
  std::sort(manifest.test_profiles.begin(), manifest.test_profiles.end());
  return apply_split(records, manifest);
}

}  // namespace pcl
