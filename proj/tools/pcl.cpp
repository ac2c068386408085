// pcl: warmup -> sft -> selfplay/cspa -> eval, plus split and report.
#include <iostream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "pcl/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kRuntime = 2, kPrerequisite = 3 };

// "--sft.warmup-ratio 0.2" and "--sft.warmup-ratio=0.2" both become "sft.warmup_ratio=0.2".
std::vector<std::string> flags_to_overrides(const std::vector<std::string>& extras) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() <= 2) throw CLI::ExtrasError({arg});
    std::string key = arg.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else if (i + 1 < extras.size() && extras[i + 1].rfind("--", 0) != 0) {
      value = extras[++i];
    } else {
      value = "true";
    }
    for (char& c : key)
      if (c == '-') c = '_';
    out.push_back(key + "=" + value);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Persona-aware contrastive learning pipeline"};
  app.require_subcommand(1);
  app.allow_extras();
  app.fallthrough();

  std::string config_path;
  bool offline = false;
  std::vector<std::string> sets;
  std::string log_level = "info";
  app.add_option("-c,--config", config_path, "TOML or JSON run config")->check(CLI::ExistingFile);
  app.add_flag("--offline", offline, "force toy, synthetic and stub backends");
  app.add_option("--set", sets, "override a config key, e.g. --set cspa.beta=0.05");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  auto* warmup = app.add_subcommand("warmup", "generate COP warmup data with the teacher");
  auto* sft = app.add_subcommand("sft", "train the toy policy on the warmup data");
  auto* selfplay = app.add_subcommand("selfplay", "sample persona-present / persona-ablated pairs for one epoch");
  std::size_t epoch = 1;
  selfplay->add_option("--epoch", epoch, "self-play epoch (1-based)");
  auto* cspa = app.add_subcommand("cspa", "contrastive self-play alignment over all epochs");
  auto* eval = app.add_subcommand("eval", "pairwise judging and metric scoring of two systems");
  auto* split = app.add_subcommand("split", "materialize a profile-disjoint train/test split");
  auto* report = app.add_subcommand("report", "render report.json files as tables");
  std::vector<std::string> report_paths;
  report->add_option("paths", report_paths, "report.json files")->required();
  for (auto* sub : app.get_subcommands({})) sub->allow_extras();

  std::vector<std::string> overrides;
  try {
    app.parse(argc, argv);
    std::vector<std::string> extras = app.remaining();
    for (auto* sub : app.get_subcommands()) {
      auto more = sub->remaining();
      extras.insert(extras.end(), more.begin(), more.end());
    }
    overrides = flags_to_overrides(extras);
    overrides.insert(overrides.end(), sets.begin(), sets.end());
    if (offline) overrides.emplace_back("offline=true");
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt("pcl"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (report->parsed()) {
      std::vector<std::filesystem::path> paths(report_paths.begin(), report_paths.end());
      std::cout << pcl::cmd_report(paths);
      return kOk;
    }
    const pcl::RunConfig cfg = pcl::load_run_config(config_path, overrides);
    if (warmup->parsed()) {
      const auto out = pcl::cmd_warmup(cfg);
      std::cout << out.result.summary().dump() << "\n";
    } else if (sft->parsed()) {
      const auto out = pcl::cmd_sft(cfg);
      std::cout << out.manifest.summary.dump() << "\n";
    } else if (selfplay->parsed()) {
      const auto out = pcl::cmd_selfplay(cfg, epoch);
      std::cout << out.summary.summary().dump() << "\n";
    } else if (cspa->parsed()) {
      const auto out = pcl::cmd_cspa(cfg);
      std::cout << out.manifest.summary.dump() << "\n";
    } else if (eval->parsed()) {
      const auto out = pcl::cmd_eval(cfg);
      std::cout << pcl::render_report_tables(out.report.to_json());
    } else if (split->parsed()) {
      const auto out = pcl::cmd_split(cfg);
      std::cout << out.split.to_json().dump() << "\n";
    }
  } catch (const pcl::PrerequisiteError& e) {
    spdlog::error("{}", e.what());
    return kPrerequisite;
  } catch (const pcl::ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntime;
  }
  return kOk;
}
