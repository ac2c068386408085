#include "pcl/datasets.hpp"

namespace pcl {

json to_json(const SftExample& ex) { return {{"system", ex.system_prompt}, {"input", ex.input}, {"target", ex.target}}; }

SftExample sft_example_from_json(const json& j) {
  return {j.at("system").get<std::string>(), j.at("input").get<std::string>(), j.at("target").get<std::string>()};
}

json to_json(const PreferencePair& pair) {
  return {{"context_id", pair.context_id},         {"epoch", pair.epoch},
          {"prompt", pair.prompt},                 {"chosen", pair.chosen},
          {"rejected", pair.rejected},             {"chosen_parsed", pair.chosen_parsed},
          {"rejected_parsed", pair.rejected_parsed}, {"rejected_prompt", pair.rejected_prompt}};
}

PreferencePair preference_pair_from_json(const json& j) {
  PreferencePair p;
  p.context_id = j.at("context_id").get<std::string>();
  p.epoch = j.at("epoch").get<std::size_t>();
  p.prompt = j.at("prompt").get<std::string>();
  p.chosen = j.at("chosen").get<std::string>();
  p.rejected = j.at("rejected").get<std::string>();
  p.chosen_parsed = j.at("chosen_parsed").get<bool>();
  p.rejected_parsed = j.at("rejected_parsed").get<bool>();
  p.rejected_prompt = j.value("rejected_prompt", std::string{});
  return p;
}

void emit_sft_dataset(const std::vector<SftExample>& examples, const std::filesystem::path& path) {
  std::vector<json> rows;
  rows.reserve(examples.size());
  for (const auto& ex : examples) rows.push_back(to_json(ex));
  write_file_atomic(path, to_jsonl(rows));
}

std::vector<SftExample> load_sft_dataset(const std::filesystem::path& path) {
  std::vector<SftExample> out;
  for (const auto& row : read_jsonl(path)) out.push_back(sft_example_from_json(row));
  return out;
}

void emit_preference_dataset(const std::vector<PreferencePair>& pairs, const std::filesystem::path& path) {
  std::vector<json> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) rows.push_back(to_json(p));
  write_file_atomic(path, to_jsonl(rows));
}

std::vector<PreferencePair> load_preference_dataset(const std::filesystem::path& path) {
  std::vector<PreferencePair> out;
  for (const auto& row : read_jsonl(path)) out.push_back(preference_pair_from_json(row));
  return out;
}

}  // namespace pcl
