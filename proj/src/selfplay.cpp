#include "pcl/selfplay.hpp"

#include <optional>

namespace pcl {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool parses(std::string_view text, const CopTemplate& tmpl, const std::string& role, const CopMarkers& markers) {
  return std::holds_alternative<CopTrace>(parse_cop_output(text, tmpl.chain_length, role, markers));
}

}  // namespace

json WarmupResult::summary() const {
  return {{"requested", requested}, {"kept", examples.size()}, {"filtered", filtered},
          {"failed", failed},       {"shortfall", shortfall()}, {"errors", errors}};
}

WarmupResult generate_warmup(const std::vector<CorpusRecord>& records, Backend& teacher, std::size_t n_points,
                             const CopTemplate& tmpl, const WarmupOptions& options) {
  if (n_points > records.size())
    throw Error("warmup: n_points (" + std::to_string(n_points) + ") exceeds the record count (" +
                std::to_string(records.size()) + ")");
  auto order = seeded_permutation(records.size(), options.seed);
  order.resize(n_points);

  std::vector<GenRequest> requests(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const auto& rec = records[order[i]];
    auto& req = requests[i];
    req.system_prompt = options.system_prompt;
    req.prompt = build_cop_prompt(rec.profile, rec.context, tmpl, options.prompt);
    req.max_tokens = options.max_tokens;
    req.temperature = options.temperature;
    req.seed = mix_seed(options.seed, fnv1a(rec.context.context_id));
  }

  std::vector<std::optional<std::string>> outputs(n_points);
  std::vector<std::string> call_errors(n_points);
  bounded_for(n_points, teacher.max_in_flight(), [&](std::size_t i) {
    try {
      auto seqs = teacher.generate(requests[i]);
      if (!seqs.empty()) outputs[i] = std::move(seqs.front().text);
    } catch (const std::exception& e) {
      call_errors[i] = e.what();
    }
  });

  WarmupResult result;
  result.requested = n_points;
  for (std::size_t i = 0; i < n_points; ++i) {
    const auto& rec = records[order[i]];
    if (!outputs[i]) {
      ++result.failed;
      result.errors.push_back(rec.context.context_id + ": " + call_errors[i]);
      continue;
    }
    auto parsed = parse_cop_output(*outputs[i], tmpl.chain_length, rec.profile.role_name, options.prompt.markers);
    if (auto* trace = std::get_if<CopTrace>(&parsed)) {
      result.examples.push_back({options.system_prompt, requests[i].prompt, render_cop_target(*trace, options.prompt.markers)});
    } else {
      ++result.filtered;
    }
  }
  if (result.examples.empty())
    throw Error("warmup: zero kept examples (" + std::to_string(result.filtered) + " filtered, " +
                std::to_string(result.failed) + " failed)");
  return result;
}

PairSeeds pair_seeds(std::uint64_t run_seed, std::string_view context_id, std::size_t epoch, std::size_t draw) {
  const std::uint64_t base = mix_seed(mix_seed(run_seed, fnv1a(context_id)), epoch * 1009 + draw);
  return {mix_seed(base, 1), mix_seed(base, 2)};
}

PairOutcome sample_pair(const CorpusRecord& record, Backend& policy, const CopTemplate& tmpl,
                        const SamplerOptions& options, std::size_t epoch, std::size_t draw) {
  const auto& role = record.profile.role_name;
  const RoleProfile ablated = RoleProfile::empty_for(role);
  const auto seeds = pair_seeds(options.seed, record.context.context_id, epoch, draw);

  GenRequest with_persona;
  with_persona.system_prompt = options.system_prompt;
  with_persona.prompt = build_cop_prompt(record.profile, record.context, tmpl, options.prompt);
  with_persona.max_tokens = options.max_tokens;
  with_persona.temperature = options.temperature;
  with_persona.seed = seeds.chosen;

  GenRequest without_persona = with_persona;
  without_persona.prompt = build_cop_prompt(ablated, record.context, tmpl, options.prompt);
  without_persona.seed = seeds.rejected;

  auto chosen = policy.generate(with_persona);
  auto rejected = policy.generate(without_persona);
  if (chosen.empty() || rejected.empty()) throw BackendError("backend returned no samples");

  PreferencePair pair;
  pair.context_id = record.context.context_id;
  pair.epoch = epoch;
  pair.prompt = std::move(with_persona.prompt);
  pair.rejected_prompt = std::move(without_persona.prompt);
  pair.chosen = std::move(chosen.front().text);
  pair.rejected = std::move(rejected.front().text);
  pair.chosen_parsed = parses(pair.chosen, tmpl, role, options.prompt.markers);
  pair.rejected_parsed = parses(pair.rejected, tmpl, role, options.prompt.markers);

  if (trim(pair.chosen) == trim(pair.rejected)) return Degenerate{pair.context_id, "chosen equals rejected"};
  if (options.strict) {
    if (!pair.chosen_parsed && !pair.rejected_parsed) return Degenerate{pair.context_id, "both samples unparseable"};
    if (!pair.chosen_parsed) return Degenerate{pair.context_id, "chosen sample unparseable"};
    if (!pair.rejected_parsed) return Degenerate{pair.context_id, "rejected sample unparseable"};
  }
  return pair;
}

json EpochSummary::summary() const {
  return {{"epoch", epoch},
          {"path", path.filename().string()},
          {"attempted", attempted},
          {"written", written},
          {"degenerate", degenerate},
          {"failed", failed},
          {"chosen_unparsed", chosen_unparsed},
          {"rejected_unparsed", rejected_unparsed},
          {"errors", errors}};
}

std::filesystem::path pair_file_path(const std::filesystem::path& out_dir, std::size_t epoch) {
  return out_dir / ("pairs.epoch-" + std::to_string(epoch) + ".jsonl");
}

EpochSummary run_epoch_generation(const std::vector<CorpusRecord>& records, Backend& policy, std::size_t epoch,
                                  const CopTemplate& tmpl, const std::filesystem::path& out_dir,
                                  const SamplerOptions& options) {
  if (epoch < 1) throw Error("run_epoch_generation: epoch must be >= 1");
  const std::size_t draws = std::max<std::size_t>(1, options.oversample);
  const std::size_t n = records.size() * draws;

  std::vector<std::optional<PairOutcome>> outcomes(n);
  std::vector<std::string> errors(n);
  bounded_for(n, policy.max_in_flight(), [&](std::size_t i) {
    try {
      outcomes[i] = sample_pair(records[i / draws], policy, tmpl, options, epoch, i % draws);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  EpochSummary summary;
  summary.epoch = epoch;
  summary.path = pair_file_path(out_dir, epoch);
  summary.attempted = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (!outcomes[i]) {
      ++summary.failed;
      summary.errors.push_back(records[i / draws].context.context_id + ": " + errors[i]);
      continue;
    }
    if (std::holds_alternative<Degenerate>(*outcomes[i])) {
      ++summary.degenerate;
      continue;
    }
    auto& pair = std::get<PreferencePair>(*outcomes[i]);
    summary.chosen_unparsed += !pair.chosen_parsed;
    summary.rejected_unparsed += !pair.rejected_parsed;
    summary.pairs.push_back(std::move(pair));
  }
  summary.written = summary.pairs.size();
  emit_preference_dataset(summary.pairs, summary.path);
  return summary;
}

}  // namespace pcl
