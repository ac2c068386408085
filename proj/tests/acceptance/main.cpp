// Acceptance gate: one PASS/FAIL line per criterion. Pass criterion ids to run a subset.
#include <algorithm>
#include <cstdio>
#include <exception>
#include <random>

#include <spdlog/spdlog.h>

#include "acceptance.hpp"

namespace acceptance {

ScratchDir::ScratchDir(const std::string& tag) {
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() / ("pcl-acceptance-" + tag + "-" + std::to_string(rd()));
  std::filesystem::create_directories(path_);
}

ScratchDir::~ScratchDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace acceptance

int main(int argc, char** argv) {
  using namespace acceptance;
  using std::chrono::duration;
  spdlog::set_level(spdlog::level::warn);

  const std::vector<Criterion> criteria = {
      {"c1", "dpo identity point", duration<double>(1.0), dpo_identity_point},
      {"c2", "gradient oracle", duration<double>(30.0), gradient_oracle},
      {"c3", "cop round trip", duration<double>(5.0), cop_round_trip},
      {"c4", "table average reproduction", duration<double>(1.0), table_average_reproduction},
      {"c5", "position bias cancellation", duration<double>(5.0), position_bias_cancellation},
      {"c6", "toy end-to-end", duration<double>(120.0), toy_end_to_end},
      {"c7", "split integrity", duration<double>(1.0), split_integrity},
      {"c8", "annotation-free", duration<double>(5.0), annotation_free},
  };

  std::vector<std::string> wanted(argv + 1, argv + argc);
  int failures = 0;
  int ran = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const duration<double> took = std::chrono::steady_clock::now() - start;
    if (took > c.budget) {
      out.pass = false;
      out.detail += "; over budget (" + std::to_string(c.budget.count()) + " s)";
    }
    std::printf("%s %s %s: %s [%.3f s]\n", out.pass ? "PASS" : "FAIL", c.id.c_str(), c.name.c_str(),
                out.detail.c_str(), took.count());
    std::fflush(stdout);
    failures += out.pass ? 0 : 1;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion matched\n");
    return 2;
  }
  std::printf("%d/%d criteria passed\n", ran - failures, ran);
  return failures == 0 ? 0 : 1;
}
