#include <algorithm>
#include <set>
#include <sstream>

#include "acceptance.hpp"
#include "pcl/pipeline.hpp"
#include "pcl/synthetic.hpp"

namespace acceptance {

namespace {

constexpr double kMinProbeAccuracy = 0.7;
constexpr std::uint64_t kProbeSeed = 99001;

/// The offline toy setup: byte bigram policy, synthetic teacher, chain length 1.
pcl::RunConfig toy_config(const std::filesystem::path& corpus, const std::filesystem::path& out) {
  pcl::RunConfig cfg;
  cfg.corpus = corpus;
  cfg.output_dir = out;
  cfg.template_id = "pcl-profile-last";
  cfg.chain_length = 1;
  cfg.seed = 7;
  cfg.offline = true;
  cfg.warmup.points = 20;
  cfg.selfplay.temperature = 1.0;
  cfg.selfplay.max_tokens = 8;
  cfg.selfplay.oversample = 4;
  cfg.eval.temperature = 1.0;
  cfg.eval.max_tokens = 96;

  cfg.sft.optimizer = pcl::OptimizerKind::AdamW;
  cfg.sft.lr = 0.3;
  cfg.sft.batch_size = 2;
  cfg.sft.warmup_ratio = 0.1;
  cfg.sft.schedule = pcl::Schedule::Cosine;
  cfg.sft.epochs = 3;

  cfg.cspa.optimizer = pcl::OptimizerKind::RmsProp;
  cfg.cspa.lr = 0.02;
  cfg.cspa.batch_size = 2;
  cfg.cspa.warmup_ratio = 0.2;
  cfg.cspa.schedule = pcl::Schedule::Linear;
  cfg.cspa.epochs = 2;
  cfg.cspa.beta = 0.1;
  return cfg;
}

std::filesystem::path write_corpus(const std::filesystem::path& dir, const pcl::SyntheticCorpusOptions& opts) {
  const auto corpus = pcl::make_synthetic_corpus(opts);
  const auto path = dir / "corpus.jsonl";
  pcl::write_file_atomic(path, pcl::serialize_corpus(corpus.records));
  return path;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed << x;
  return os.str();
}

}  // namespace

Outcome toy_end_to_end() {
  ScratchDir dir("toy");
  const auto corpus_path = write_corpus(dir.path(), {.n_profiles = 20, .n_records = 20, .seed = 7});
  const auto cfg = toy_config(corpus_path, dir.path() / "run");
  const pcl::RunLayout layout{cfg.output_dir};
  std::vector<std::string> problems;

  pcl::cmd_warmup(cfg);
  const auto sft = pcl::cmd_sft(cfg);
  const auto& losses = sft.report.epoch_losses;
  const bool decreasing = losses.size() >= 2 && std::adjacent_find(losses.begin(), losses.end(), std::less_equal<>()) == losses.end();
  if (!decreasing) problems.push_back("(a) sft epoch losses not strictly decreasing");

  const auto sft_sha = pcl::sha256_file(layout.sft_checkpoint());
  const auto sft_ckpt = pcl::load_checkpoint(layout.sft_checkpoint());

  // Frozen probe pairs drawn from the SFT policy with a seed the run never uses.
  const auto records = pcl::training_records(cfg);
  const auto tmpl = pcl::resolve_template(cfg);
  pcl::ToyPolicyBackend sft_backend(std::make_shared<const pcl::ToyPolicy>(sft_ckpt.policy));
  pcl::SamplerOptions probe_opts;
  probe_opts.temperature = cfg.selfplay.temperature;
  probe_opts.max_tokens = cfg.selfplay.max_tokens;
  probe_opts.seed = kProbeSeed;
  probe_opts.oversample = 5;
  const auto probe = pcl::run_epoch_generation(records, sft_backend, 1, tmpl, dir.path() / "probe", probe_opts).pairs;

  const auto before = pcl::evaluate_pairs(sft_ckpt.policy, sft_ckpt.policy, probe, cfg.cspa);
  if (before.preference_accuracy != 0.5 || before.mean_margin != 0.0)
    problems.push_back("identity point off: accuracy " + fmt(before.preference_accuracy) + ", margin " + fmt(before.mean_margin));

  pcl::cmd_cspa(cfg);
  const auto cspa_ckpt = pcl::load_checkpoint(layout.cspa_checkpoint());
  const auto after = pcl::evaluate_pairs(cspa_ckpt.policy, sft_ckpt.policy, probe, cfg.cspa);
  if (!(after.mean_margin > before.mean_margin)) problems.push_back("(b) probe margin did not increase");
  if (!(after.preference_accuracy >= kMinProbeAccuracy))
    problems.push_back("(c) probe accuracy " + fmt(after.preference_accuracy) + " < " + fmt(kMinProbeAccuracy));

  if (pcl::sha256_file(layout.sft_checkpoint()) != sft_sha) problems.push_back("(d) sft checkpoint file changed");
  if (!(pcl::load_checkpoint(layout.sft_checkpoint()).policy == sft_ckpt.policy)) problems.push_back("(d) sft weights changed");
  for (std::size_t e : {1, 2})
    if (!std::filesystem::exists(pcl::pair_file_path(layout.cspa_dir(), e)))
      problems.push_back("pairs for epoch " + std::to_string(e) + " missing");

  std::ostringstream os;
  os << "sft losses";
  for (double l : losses) os << " " << fmt(l);
  os << "; " << probe.size() << " probe pairs: margin " << fmt(before.mean_margin) << " -> " << fmt(after.mean_margin)
     << ", accuracy " << fmt(before.preference_accuracy) << " -> " << fmt(after.preference_accuracy);
  for (const auto& p : problems) os << "; " << p;
  return {problems.empty(), os.str()};
}

Outcome split_integrity() {
  const auto corpus = pcl::make_synthetic_corpus({.n_profiles = 77, .n_records = 231, .seed = 5});
  std::vector<std::string> problems;
  if (corpus.profile_count() != 77) problems.push_back("fixture has " + std::to_string(corpus.profile_count()) + " profiles");

  const auto split = pcl::transfer_split(corpus.records, 60, 2024);
  const auto& m = split.manifest;
  const std::set<std::string> train(m.train_profiles.begin(), m.train_profiles.end());
  const std::set<std::string> test(m.test_profiles.begin(), m.test_profiles.end());
  std::set<std::string> all;
  for (const auto& p : corpus.profiles) all.insert(p.role_name);

  if (train.size() != 60 || test.size() != 17)
    problems.push_back("sizes " + std::to_string(train.size()) + "/" + std::to_string(test.size()));
  std::vector<std::string> overlap;
  std::set_intersection(train.begin(), train.end(), test.begin(), test.end(), std::back_inserter(overlap));
  if (!overlap.empty()) problems.push_back(std::to_string(overlap.size()) + " profiles on both sides");
  std::set<std::string> both = train;
  both.insert(test.begin(), test.end());
  if (both != all) problems.push_back("union does not cover the profiles");

  for (const auto& r : split.train)
    if (!train.count(r.profile.role_name)) problems.push_back("train record " + r.context.context_id + " has a test role");
  for (const auto& r : split.test)
    if (!test.count(r.profile.role_name)) problems.push_back("test record " + r.context.context_id + " has a train role");
  if (split.train.size() + split.test.size() != corpus.records.size()) problems.push_back("records lost");

  if (!(pcl::transfer_split(corpus.records, 60, 2024).manifest == m)) problems.push_back("same seed gave another split");
  if (pcl::transfer_split(corpus.records, 60, 2025).manifest == m) problems.push_back("different seed gave the same split");
  const auto reapplied = pcl::apply_split(corpus.records, m);
  if (reapplied.train != split.train || reapplied.test != split.test) problems.push_back("manifest does not reproduce the split");

  std::ostringstream os;
  os << train.size() << " train / " << test.size() << " test profiles, " << split.train.size() << " / "
     << split.test.size() << " records";
  for (const auto& p : problems) os << "; " << p;
  return {problems.empty(), os.str()};
}

Outcome annotation_free() {
  ScratchDir dir("poison");
  const auto corpus_path =
      write_corpus(dir.path(), {.n_profiles = 20, .n_records = 20, .seed = 7, .poison_gold = true});
  const auto cfg = toy_config(corpus_path, dir.path() / "run");
  std::vector<std::string> problems;

  const bool corpus_poisoned = pcl::read_file(corpus_path).find(pcl::kPoisonPrefix) != std::string::npos;
  if (!corpus_poisoned) problems.push_back("corpus carries no poison marker");

  pcl::cmd_warmup(cfg);
  pcl::cmd_sft(cfg);
  pcl::cmd_cspa(cfg);

  std::size_t scanned = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(cfg.output_dir)) {
    if (!entry.is_regular_file()) continue;
    ++scanned;
    if (pcl::read_file(entry.path()).find(pcl::kPoisonPrefix) != std::string::npos)
      problems.push_back("poison marker in " + std::filesystem::relative(entry.path(), cfg.output_dir).string());
  }
  if (scanned == 0) problems.push_back("no artifacts written");

  std::ostringstream os;
  os << scanned << " artifacts scanned for " << pcl::kPoisonPrefix;
  for (const auto& p : problems) os << "; " << p;
  return {problems.empty(), os.str()};
}

}  // namespace acceptance
