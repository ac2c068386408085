#include "pcl/pipeline.hpp"

#include <algorithm>
#include <array>

#include <spdlog/spdlog.h>

#include "pcl/synthetic.hpp"

#ifndef PCL_VERSION
#define PCL_VERSION "0.0.0"
#endif

namespace pcl {

namespace {

constexpr std::array<std::size_t, 5> kStudiedChainLengths = {0, 1, 3, 5, 10};

std::string display_path(const std::filesystem::path& p, const std::filesystem::path& root) {
  const auto rel = p.lexically_relative(root);
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return p.generic_string();
}

void add_file(std::vector<std::pair<std::string, std::string>>& list, const std::filesystem::path& p,
              const std::filesystem::path& root) {
  list.emplace_back(display_path(p, root), sha256_file(p));
}

void require(const std::filesystem::path& p, const std::string& producer) {
  if (!std::filesystem::exists(p)) throw PrerequisiteError(p, producer);
}

RunManifest start_manifest(const RunConfig& cfg, std::string command) {
  RunManifest m;
  m.command = std::move(command);
  m.version = pcl_version();
  m.config_hash = cfg.hash();
  return m;
}

void write_manifest(const RunConfig& cfg, const RunManifest& m) {
  write_file_atomic(RunLayout{cfg.output_dir}.manifest(m.command), m.to_json().dump(2) + "\n");
}

void log_config(const RunConfig& cfg, std::string_view command) {
  spdlog::info("{}: effective config {}", command, cfg.to_json().dump());
  if (std::find(kStudiedChainLengths.begin(), kStudiedChainLengths.end(), cfg.chain_length) ==
      kStudiedChainLengths.end())
    spdlog::warn("chain_length {} is outside the studied grid {{0, 1, 3, 5, 10}}", cfg.chain_length);
}

Corpus load_configured_corpus(const RunConfig& cfg) {
  if (cfg.corpus.empty()) throw ConfigError("config has no corpus path");
  if (!std::filesystem::exists(cfg.corpus)) throw ConfigError("corpus not found: " + cfg.corpus.string());
  Corpus corpus = load_corpus(cfg.corpus);
  for (const auto& w : corpus.warnings) spdlog::warn("corpus: {}", w);
  return corpus;
}

PromptOptions prompt_options(const RunConfig& cfg) {
  PromptOptions o;
  o.max_prompt_tokens = cfg.max_prompt_tokens;
  return o;
}

SamplerOptions sampler_options(const RunConfig& cfg) {
  SamplerOptions o;
  o.system_prompt = cfg.selfplay.system_prompt;
  o.temperature = cfg.selfplay.temperature;
  o.max_tokens = cfg.selfplay.max_tokens;
  o.seed = cfg.seed;
  o.strict = cfg.selfplay.strict;
  o.oversample = cfg.selfplay.oversample;
  o.prompt = prompt_options(cfg);
  return o;
}

Checkpoint load_required_checkpoint(const std::filesystem::path& p, const std::string& producer) {
  require(p, producer);
  return load_checkpoint(p);
}

std::filesystem::path system_checkpoint(const RunConfig& cfg, const std::string& system) {
  const RunLayout layout{cfg.output_dir};
  if (system == "sft") return layout.sft_checkpoint();
  if (system == "cspa") return layout.cspa_checkpoint();
  return system;
}

std::string producer_of(const std::string& system) { return system == "sft" ? "sft" : "cspa"; }

std::string extract_response(std::string_view output) {
  const auto offset = final_response_offset(output);
  return std::string(trim(output.substr(offset)));
}

std::uint64_t text_seed(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  return h;
}

}  // namespace

json RunManifest::to_json() const {
  json in = json::object();
  for (const auto& [k, v] : inputs) in[k] = v;
  json out = json::object();
  for (const auto& [k, v] : outputs) out[k] = v;
  return {{"command", command}, {"version", version}, {"config_hash", config_hash},
          {"inputs", in},       {"outputs", out},     {"summary", summary}};
}

std::string pcl_version() { return PCL_VERSION; }

std::vector<CorpusRecord> training_records(const RunConfig& cfg) {
  Corpus corpus = load_configured_corpus(cfg);
  const auto manifest = RunLayout{cfg.output_dir}.split_manifest();
  if (!std::filesystem::exists(manifest)) return std::move(corpus.records);
  spdlog::info("using the train side of {}", manifest.string());
  return apply_split(corpus.records, SplitManifest::from_json(json::parse(read_file(manifest)))).train;
}

std::vector<CorpusRecord> evaluation_records(const RunConfig& cfg) {
  Corpus corpus = load_configured_corpus(cfg);
  const auto manifest = RunLayout{cfg.output_dir}.split_manifest();
  if (!std::filesystem::exists(manifest)) return std::move(corpus.records);
  spdlog::info("using the test side of {}", manifest.string());
  return apply_split(corpus.records, SplitManifest::from_json(json::parse(read_file(manifest)))).test;
}

CopTemplate resolve_template(const RunConfig& cfg) {
  TemplateRegistry registry;
  if (!cfg.template_manifest.empty()) registry.load_manifest(cfg.template_manifest);
  if (!registry.contains(cfg.template_id)) throw ConfigError("unknown template_id '" + cfg.template_id + "'");
  return registry.resolve(cfg.template_id, cfg.chain_length);
}

std::unique_ptr<Backend> make_teacher(const RunConfig& cfg, const std::vector<CorpusRecord>& records,
                                      const CopTemplate& tmpl) {
  const std::string kind = cfg.offline && cfg.teacher.kind == "remote" ? "synthetic" : cfg.teacher.kind;
  if (kind == "synthetic") return std::make_unique<SyntheticTeacher>(records, tmpl, prompt_options(cfg));
  if (kind == "mock") return std::make_unique<MockBackend>(cfg.teacher.options.value("script", std::vector<std::string>{}));
  if (kind == "remote") return std::make_unique<RemoteChatBackend>(RemoteConfig::from_json(cfg.teacher.options));
  throw ConfigError("unknown teacher kind '" + kind + "'");
}

std::unique_ptr<Backend> make_judge(const RunConfig& cfg) {
  const std::string kind = cfg.offline && cfg.judge.kind == "remote" ? "overlap" : cfg.judge.kind;
  if (kind == "overlap") return std::make_unique<OverlapJudge>();
  if (kind == "mock") return std::make_unique<MockBackend>(cfg.judge.options.value("script", std::vector<std::string>{}));
  if (kind == "remote") return std::make_unique<RemoteChatBackend>(RemoteConfig::from_json(cfg.judge.options));
  throw ConfigError("unknown judge kind '" + kind + "'");
}

std::unique_ptr<Scorer> make_scorer(const RunConfig& cfg) {
  const std::string kind = cfg.offline && cfg.scorer.kind == "http" ? "heuristic" : cfg.scorer.kind;
  if (kind == "heuristic") return std::make_unique<StubScorer>(heuristic_scorer());
  if (kind == "constant") return std::make_unique<StubScorer>(StubScorer::constant(cfg.scorer.options.value("value", 3.0)));
  if (kind == "http") return std::make_unique<HttpScorer>(HttpScorerConfig::from_json(cfg.scorer.options));
  throw ConfigError("unknown scorer kind '" + kind + "'");
}

ToyPolicy initial_policy(const RunConfig& cfg) {
  Vocabulary vocab = Vocabulary::bytes();
  if (cfg.policy.alphabet.empty()) {
    std::string ascii;
    for (int c = 0; c < 128; ++c) ascii.push_back(static_cast<char>(c));
    vocab = Vocabulary::from_alphabet(ascii);
  } else if (cfg.policy.alphabet != "bytes") {
    vocab = Vocabulary::from_alphabet(cfg.policy.alphabet);
  }
  if (cfg.policy.init_scale > 0.0) return ToyPolicy::random(std::move(vocab), mix_seed(cfg.seed, 0x1417), cfg.policy.init_scale);
  return ToyPolicy(std::move(vocab));
}

WarmupOutcome cmd_warmup(const RunConfig& cfg) {
  log_config(cfg, "warmup");
  const RunLayout layout{cfg.output_dir};
  const auto records = training_records(cfg);
  const auto tmpl = resolve_template(cfg);
  auto teacher = make_teacher(cfg, records, tmpl);

  std::size_t points = cfg.warmup.points;
  if (points > records.size()) {
    spdlog::warn("warmup.points = {} exceeds the {} available records; using all of them", points, records.size());
    points = records.size();
  }
  WarmupOptions opts;
  opts.system_prompt = cfg.warmup.system_prompt;
  opts.temperature = cfg.warmup.temperature;
  opts.max_tokens = cfg.warmup.max_tokens;
  opts.seed = cfg.seed;
  opts.prompt = prompt_options(cfg);

  WarmupOutcome out{generate_warmup(records, *teacher, points, tmpl, opts), start_manifest(cfg, "warmup")};
  if (out.result.shortfall() > 0)
    spdlog::warn("warmup kept {} of {} requested examples", out.result.examples.size(), out.result.requested);
  emit_sft_dataset(out.result.examples, layout.warmup_dataset());
  write_file_atomic(layout.warmup_summary(), out.result.summary().dump(2) + "\n");

  add_file(out.manifest.inputs, cfg.corpus, cfg.output_dir);
  add_file(out.manifest.outputs, layout.warmup_dataset(), cfg.output_dir);
  out.manifest.summary = out.result.summary();
  write_manifest(cfg, out.manifest);
  return out;
}

SftOutcome cmd_sft(const RunConfig& cfg) {
  log_config(cfg, "sft");
  const RunLayout layout{cfg.output_dir};
  require(layout.warmup_dataset(), "warmup");
  const auto examples = load_sft_dataset(layout.warmup_dataset());

  Checkpoint ckpt{initial_policy(cfg), std::nullopt, 0, cfg.hash()};
  TrainerState state;
  SftOutcome out{sft_train(ckpt.policy, examples, cfg.sft, &state), start_manifest(cfg, "sft")};
  ckpt.optimizer = state.optimizer;
  ckpt.step = state.step;
  save_checkpoint(ckpt, layout.sft_checkpoint());
  write_file_atomic(layout.sft_metrics(), metrics_csv(out.report.steps));
  for (std::size_t e = 0; e < out.report.epoch_losses.size(); ++e)
    spdlog::info("sft epoch {}: mean loss {:.6f}", e + 1, out.report.epoch_losses[e]);

  add_file(out.manifest.inputs, layout.warmup_dataset(), cfg.output_dir);
  add_file(out.manifest.outputs, layout.sft_checkpoint(), cfg.output_dir);
  add_file(out.manifest.outputs, layout.sft_metrics(), cfg.output_dir);
  out.manifest.summary = {{"epoch_losses", out.report.epoch_losses}, {"steps", state.step}};
  write_manifest(cfg, out.manifest);
  return out;
}

SelfPlayOutcome cmd_selfplay(const RunConfig& cfg, std::size_t epoch) {
  log_config(cfg, "selfplay");
  if (epoch < 1) throw ConfigError("selfplay epoch must be >= 1");
  const RunLayout layout{cfg.output_dir};
  const auto source = epoch == 1 ? layout.sft_checkpoint() : layout.cspa_epoch_checkpoint(epoch - 1);
  auto ckpt = load_required_checkpoint(source, epoch == 1 ? "sft" : "cspa");
  const auto records = training_records(cfg);
  const auto tmpl = resolve_template(cfg);

  ToyPolicyBackend backend(std::make_shared<const ToyPolicy>(std::move(ckpt.policy)), cfg.policy.max_in_flight);
  SelfPlayOutcome out{run_epoch_generation(records, backend, epoch, tmpl, layout.cspa_dir(), sampler_options(cfg)),
                      start_manifest(cfg, "selfplay.epoch-" + std::to_string(epoch))};
  add_file(out.manifest.inputs, cfg.corpus, cfg.output_dir);
  add_file(out.manifest.inputs, source, cfg.output_dir);
  add_file(out.manifest.outputs, out.summary.path, cfg.output_dir);
  out.manifest.summary = out.summary.summary();
  write_manifest(cfg, out.manifest);
  return out;
}

CspaOutcome cmd_cspa(const RunConfig& cfg) {
  log_config(cfg, "cspa");
  const RunLayout layout{cfg.output_dir};
  const Checkpoint sft = load_required_checkpoint(layout.sft_checkpoint(), "sft");
  const auto records = training_records(cfg);
  const auto tmpl = resolve_template(cfg);
  const auto sampler = sampler_options(cfg);

  ToyPolicy policy = sft.policy;
  ToyPolicy ref = sft.policy;
  TrainerState state;
  state.optimizer = make_optimizer_state(cfg.cspa.optimizer, policy.weights().size());
  const std::size_t pairs_per_epoch = records.size() * std::max<std::size_t>(1, sampler.oversample);
  state.total_steps = cfg.cspa.epochs * steps_per_epoch(pairs_per_epoch, cfg.cspa.batch_size);

  CspaOutcome out;
  out.manifest = start_manifest(cfg, "cspa");
  add_file(out.manifest.inputs, cfg.corpus, cfg.output_dir);
  add_file(out.manifest.inputs, layout.sft_checkpoint(), cfg.output_dir);
  json epochs = json::array();
  for (std::size_t epoch = 1; epoch <= cfg.cspa.epochs; ++epoch) {
    if (cfg.cspa.refresh_reference && epoch > 1) ref = policy;
    ToyPolicyBackend backend(std::make_shared<const ToyPolicy>(policy), cfg.policy.max_in_flight);
    auto summary = run_epoch_generation(records, backend, epoch, tmpl, layout.cspa_dir(), sampler);
    spdlog::info("cspa epoch {}: {} pairs written, {} degenerate, {} failed", epoch, summary.written,
                 summary.degenerate, summary.failed);
    if (summary.pairs.empty()) {
      spdlog::warn("cspa epoch {}: no usable pairs; skipping the update", epoch);
    } else {
      auto steps = cspa_epoch(policy, ref, summary.pairs, cfg.cspa, state, epoch - 1);
      out.steps.insert(out.steps.end(), steps.begin(), steps.end());
    }
    save_checkpoint({policy, state.optimizer, state.step, cfg.hash()}, layout.cspa_epoch_checkpoint(epoch));
    add_file(out.manifest.outputs, summary.path, cfg.output_dir);
    add_file(out.manifest.outputs, layout.cspa_epoch_checkpoint(epoch), cfg.output_dir);
    epochs.push_back(summary.summary());
    out.epochs.push_back(std::move(summary));
  }
  save_checkpoint({policy, state.optimizer, state.step, cfg.hash()}, layout.cspa_checkpoint());
  write_file_atomic(layout.cspa_metrics(), metrics_csv(out.steps));
  add_file(out.manifest.outputs, layout.cspa_checkpoint(), cfg.output_dir);
  add_file(out.manifest.outputs, layout.cspa_metrics(), cfg.output_dir);
  out.manifest.summary = {{"epochs", epochs}, {"steps", state.step}};
  write_manifest(cfg, out.manifest);
  return out;
}

EvalOutcome cmd_eval(const RunConfig& cfg) {
  log_config(cfg, "eval");
  const RunLayout layout{cfg.output_dir};
  const auto path_a = system_checkpoint(cfg, cfg.eval.system_a);
  const auto path_b = system_checkpoint(cfg, cfg.eval.system_b);
  const auto policy_a = load_required_checkpoint(path_a, producer_of(cfg.eval.system_a)).policy;
  const auto policy_b = load_required_checkpoint(path_b, producer_of(cfg.eval.system_b)).policy;

  auto records = evaluation_records(cfg);
  if (cfg.eval.max_items > 0 && records.size() > cfg.eval.max_items) records.resize(cfg.eval.max_items);
  if (records.empty()) throw Error("eval: no records to evaluate");
  const auto tmpl = resolve_template(cfg);
  const auto popts = prompt_options(cfg);

  ToyPolicyBackend backend_a(std::make_shared<const ToyPolicy>(policy_a), cfg.policy.max_in_flight);
  ToyPolicyBackend backend_b(std::make_shared<const ToyPolicy>(policy_b), cfg.policy.max_in_flight);
  std::vector<GenRequest> requests(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& req = requests[i];
    req.prompt = build_cop_prompt(records[i].profile, records[i].context, tmpl, popts);
    req.temperature = cfg.eval.temperature;
    req.max_tokens = cfg.eval.max_tokens;
    req.seed = mix_seed(cfg.seed, text_seed(records[i].context.context_id));
  }
  const auto out_a = generate_many(backend_a, requests);
  const auto out_b = generate_many(backend_b, requests);

  std::vector<JudgeItem> items;
  std::vector<ScoreItem> score_a, score_b;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    const std::string ra = extract_response(out_a[i].front().text);
    const std::string rb = extract_response(out_b[i].front().text);
    items.push_back({rec.context.context_id, rec.profile, rec.context, ra, rb});
    score_a.push_back({rec.context.context_id, rec.profile, rec.context, ra});
    score_b.push_back({rec.context.context_id, rec.profile, rec.context, rb});
  }

  const std::string judge_tmpl =
      cfg.eval.judge_template.empty() ? default_judge_template() : read_file(cfg.eval.judge_template);
  auto judge = make_judge(cfg);
  JudgeOptions jopts;
  jopts.temperature = cfg.eval.judge_temperature;

  EvalOutcome out;
  out.verdicts = judge_all(*judge, items, judge_tmpl, jopts);
  auto scorer = make_scorer(cfg);
  const auto sa = score_responses(*scorer, score_a);
  const auto sb = score_responses(*scorer, score_b);
  for (const auto& e : sa.errors) spdlog::warn("scorer ({}): {}", cfg.eval.system_a, e);
  for (const auto& e : sb.errors) spdlog::warn("scorer ({}): {}", cfg.eval.system_b, e);

  auto& r = out.report;
  r.system_a = cfg.eval.system_a;
  r.system_b = cfg.eval.system_b;
  if (const auto v = sa.present(); !v.empty()) r.scores_a = aggregate(v);
  if (const auto v = sb.present(); !v.empty()) r.scores_b = aggregate(v);
  r.missing_a = sa.missing;
  r.missing_b = sb.missing;
  r.resolved = tally(out.verdicts);
  r.per_pass = tally_per_pass(out.verdicts);
  r.flagged_passes = static_cast<std::size_t>(
      std::count_if(out.verdicts.begin(), out.verdicts.end(), [](const auto& v) { return v.flagged; }));

  const auto dir = layout.eval_dir();
  const json report_json = r.to_json();
  write_verdicts(out.verdicts, dir / "verdicts.jsonl");
  write_file_atomic(dir / "report.json", report_json.dump(2) + "\n");
  write_file_atomic(dir / "report.txt", render_report_tables(report_json));

  out.manifest = start_manifest(cfg, "eval");
  add_file(out.manifest.inputs, cfg.corpus, cfg.output_dir);
  add_file(out.manifest.inputs, path_a, cfg.output_dir);
  add_file(out.manifest.inputs, path_b, cfg.output_dir);
  for (const char* name : {"verdicts.jsonl", "report.json", "report.txt"})
    add_file(out.manifest.outputs, dir / name, cfg.output_dir);
  out.manifest.summary = {{"items", items.size()}, {"tally", r.resolved->to_json()}};
  write_manifest(cfg, out.manifest);
  return out;
}

SplitOutcome cmd_split(const RunConfig& cfg) {
  log_config(cfg, "split");
  const RunLayout layout{cfg.output_dir};
  const Corpus corpus = load_configured_corpus(cfg);
  SplitOutcome out{transfer_split(corpus.records, cfg.split.train_profiles, cfg.seed).manifest,
                   start_manifest(cfg, "split")};
  write_file_atomic(layout.split_manifest(), out.split.to_json().dump(2) + "\n");
  add_file(out.manifest.inputs, cfg.corpus, cfg.output_dir);
  add_file(out.manifest.outputs, layout.split_manifest(), cfg.output_dir);
  out.manifest.summary = {{"train_profiles", out.split.train_profiles.size()},
                          {"test_profiles", out.split.test_profiles.size()}};
  write_manifest(cfg, out.manifest);
  return out;
}

std::string cmd_report(const std::vector<std::filesystem::path>& paths) {
  if (paths.empty()) throw ConfigError("report needs at least one report.json path");
  std::string out;
  for (const auto& p : paths) {
    if (!std::filesystem::exists(p)) throw PrerequisiteError(p, "eval");
    if (!out.empty()) out += "\n";
    out += "# " + p.generic_string() + "\n";
    out += render_report_tables(json::parse(read_file(p)));
  }
  return out;
}

}  // namespace pcl
