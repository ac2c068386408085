#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  std::string name;
  /// Wall-clock budget; exceeding it fails the criterion.
  std::chrono::duration<double> budget;
  std::function<Outcome()> run;
};

Outcome dpo_identity_point();
Outcome gradient_oracle();
Outcome cop_round_trip();
Outcome table_average_reproduction();
Outcome position_bias_cancellation();
Outcome toy_end_to_end();
Outcome split_integrity();
Outcome annotation_free();

/// Fresh directory under the system temp dir, removed by the destructor.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag);
  ~ScratchDir();
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace acceptance
