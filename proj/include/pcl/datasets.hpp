#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pcl/util.hpp"

namespace pcl {

/// One warmup triple: input is the COP prompt x, target a rendered, parseable CopTrace.
struct SftExample {
  std::string system_prompt;
  std::string input;
  std::string target;

  bool operator==(const SftExample&) const = default;
};

/// A self-play pair. `prompt` is the persona-present COP prompt shared by both DPO terms;
/// `rejected_prompt` is the ablated prompt the rejected side was sampled under.
struct PreferencePair {
  std::string context_id;
  std::size_t epoch = 0;
  std::string prompt;
  std::string chosen;
  std::string rejected;
  bool chosen_parsed = false;
  bool rejected_parsed = false;
  std::string rejected_prompt;

  bool operator==(const PreferencePair&) const = default;
};

json to_json(const SftExample& ex);
SftExample sft_example_from_json(const json& j);
json to_json(const PreferencePair& pair);
PreferencePair preference_pair_from_json(const json& j);

void emit_sft_dataset(const std::vector<SftExample>& examples, const std::filesystem::path& path);
std::vector<SftExample> load_sft_dataset(const std::filesystem::path& path);
void emit_preference_dataset(const std::vector<PreferencePair>& pairs, const std::filesystem::path& path);
std::vector<PreferencePair> load_preference_dataset(const std::filesystem::path& path);

}  // namespace pcl
