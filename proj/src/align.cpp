#include "pcl/align.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "pcl/kernels.hpp"

namespace pcl {

std::string_view to_string(Stage s) { return s == Stage::CopSft ? "cop_sft" : "cspa"; }
std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::AdamW ? "adamw" : "rmsprop"; }
std::string_view to_string(Schedule s) { return s == Schedule::Cosine ? "cosine" : "linear"; }

Stage stage_from_string(std::string_view s) {
  if (s == "cop_sft") return Stage::CopSft;
  if (s == "cspa") return Stage::Cspa;
  throw Error("unknown stage '" + std::string(s) + "'");
}

OptimizerKind optimizer_from_string(std::string_view s) {
  if (s == "adamw") return OptimizerKind::AdamW;
  if (s == "rmsprop") return OptimizerKind::RmsProp;
  throw Error("unknown optimizer '" + std::string(s) + "'");
}

Schedule schedule_from_string(std::string_view s) {
  if (s == "cosine") return Schedule::Cosine;
  if (s == "linear") return Schedule::Linear;
  throw Error("unknown schedule '" + std::string(s) + "'");
}

TrainConfig TrainConfig::defaults(Stage stage) {
  TrainConfig cfg;
  cfg.stage = stage;
  if (stage == Stage::CopSft) {
    cfg.optimizer = OptimizerKind::AdamW;
    cfg.lr = 5e-6;
    cfg.warmup_ratio = 0.1;
    cfg.schedule = Schedule::Cosine;
    cfg.epochs = 3;
  } else {
    cfg.optimizer = OptimizerKind::RmsProp;
    cfg.lr = 5e-7;
    cfg.warmup_ratio = 0.2;
    cfg.schedule = Schedule::Linear;
    cfg.epochs = 2;
  }
  cfg.batch_size = 8;
  cfg.max_length = 2048;
  return cfg;
}

json TrainConfig::to_json() const {
  return {{"stage", to_string(stage)},
          {"optimizer", to_string(optimizer)},
          {"lr", lr},
          {"warmup_ratio", warmup_ratio},
          {"schedule", to_string(schedule)},
          {"batch_size", batch_size},
          {"max_length", max_length},
          {"epochs", epochs},
          {"beta", beta},
          {"score_final_only", score_final_only},
          {"refresh_reference", refresh_reference},
          {"seed", seed},
          {"adamw",
           {{"beta1", adamw.beta1}, {"beta2", adamw.beta2}, {"eps", adamw.eps}, {"weight_decay", adamw.weight_decay}}},
          {"rmsprop", {{"alpha", rmsprop.alpha}, {"eps", rmsprop.eps}}}};
}

TrainConfig TrainConfig::from_json(const json& j, Stage stage) {
  static const std::set<std::string> known{"stage",  "optimizer",        "lr",
                                           "warmup_ratio", "schedule", "batch_size",
                                           "max_length",   "epochs",   "beta",
                                           "score_final_only", "refresh_reference", "seed",
                                           "adamw",        "rmsprop"};
  for (const auto& [k, _] : j.items())
    if (!known.count(k)) throw Error("unknown training config key '" + k + "'");
  TrainConfig cfg = defaults(stage);
  if (j.contains("stage") && stage_from_string(j["stage"].get<std::string>()) != stage)
    throw Error("training config stage does not match its section");
  if (j.contains("optimizer")) cfg.optimizer = optimizer_from_string(j["optimizer"].get<std::string>());
  if (j.contains("schedule")) cfg.schedule = schedule_from_string(j["schedule"].get<std::string>());
  cfg.lr = j.value("lr", cfg.lr);
  cfg.warmup_ratio = j.value("warmup_ratio", cfg.warmup_ratio);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.max_length = j.value("max_length", cfg.max_length);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.beta = j.value("beta", cfg.beta);
  cfg.score_final_only = j.value("score_final_only", cfg.score_final_only);
  cfg.refresh_reference = j.value("refresh_reference", cfg.refresh_reference);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("adamw")) {
    const auto& a = j["adamw"];
    cfg.adamw.beta1 = a.value("beta1", cfg.adamw.beta1);
    cfg.adamw.beta2 = a.value("beta2", cfg.adamw.beta2);
    cfg.adamw.eps = a.value("eps", cfg.adamw.eps);
    cfg.adamw.weight_decay = a.value("weight_decay", cfg.adamw.weight_decay);
  }
  if (j.contains("rmsprop")) {
    const auto& r = j["rmsprop"];
    cfg.rmsprop.alpha = r.value("alpha", cfg.rmsprop.alpha);
    cfg.rmsprop.eps = r.value("eps", cfg.rmsprop.eps);
  }
  if (cfg.warmup_ratio < 0.0 || cfg.warmup_ratio > 1.0) throw Error("warmup_ratio must be in [0, 1]");
  if (cfg.batch_size == 0) throw Error("batch_size must be positive");
  if (cfg.beta <= 0.0) throw Error("beta must be positive");
  if (cfg.lr < 0.0) throw Error("lr must be non-negative");
  return cfg;
}

// ---------------------------------------------------------------------------

SftLoss sft_loss(const ToyPolicy& policy, std::string_view prompt, std::string_view target, std::size_t max_length) {
  if (target.empty()) throw Error("sft_loss: empty target");
  if (max_length > 0 && target.size() > max_length)
    throw Error("sft_loss: target has " + std::to_string(target.size()) + " tokens, max_length is " +
                std::to_string(max_length));
  const EncodedSequence seq = policy.encode(prompt, target);
  SftLoss out;
  out.loss = -kernels::sequence_logprob(policy, seq);
  out.grad.assign(policy.weights().size(), 0.0);
  const double w = -1.0;
  kernels::accumulate_grad(policy, std::span(&seq, 1), std::span(&w, 1), out.grad);
  return out;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

DpoLoss dpo_loss(const DpoBatch& batch, double beta) {
  if (!(beta > 0.0)) throw Error("dpo_loss: beta must be positive");
  DpoLoss out;
  const std::size_t n = batch.items.size();
  if (n == 0) return out;
  out.item_losses.resize(n);
  out.d_chosen.resize(n);
  out.d_rejected.resize(n);
  const double scale = beta / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = batch.items[i].margin();
    out.item_losses[i] = softplus(-beta * z);
    const double g = scale * sigmoid(-beta * z);
    out.d_chosen[i] = -g;
    out.d_rejected[i] = g;
  }
  out.loss = pairwise_sum(out.item_losses) / static_cast<double>(n);
  return out;
}

// ---------------------------------------------------------------------------

OptimizerState make_optimizer_state(OptimizerKind kind, std::size_t n_params) {
  OptimizerState s;
  s.kind = kind;
  if (kind == OptimizerKind::AdamW) s.first_moment.assign(n_params, 0.0);
  s.second_moment.assign(n_params, 0.0);
  return s;
}

void optimizer_step(OptimizerKind kind, std::span<double> params, std::span<const double> grads, OptimizerState& state,
                    double lr, const AdamWParams& adamw, const RmsPropParams& rms) {
  if (params.size() != grads.size()) throw Error("optimizer_step: params/grads shape mismatch");
  if (state.kind != kind || state.second_moment.size() != params.size() ||
      (kind == OptimizerKind::AdamW && state.first_moment.size() != params.size()))
    throw Error("optimizer_step: optimizer state does not match params");
  ++state.steps;
  const std::size_t n = params.size();
  if (kind == OptimizerKind::AdamW) {
    const double t = static_cast<double>(state.steps);
    const double c1 = 1.0 - std::pow(adamw.beta1, t);
    const double c2 = 1.0 - std::pow(adamw.beta2, t);
    for (std::size_t i = 0; i < n; ++i) {
      params[i] *= 1.0 - lr * adamw.weight_decay;
      auto& m = state.first_moment[i];
      auto& v = state.second_moment[i];
      m = adamw.beta1 * m + (1.0 - adamw.beta1) * grads[i];
      v = adamw.beta2 * v + (1.0 - adamw.beta2) * grads[i] * grads[i];
      params[i] -= lr * (m / c1) / (std::sqrt(v / c2) + adamw.eps);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      auto& v = state.second_moment[i];
      v = rms.alpha * v + (1.0 - rms.alpha) * grads[i] * grads[i];
      params[i] -= lr * grads[i] / (std::sqrt(v) + rms.eps);
    }
  }
}

double lr_at(Schedule schedule, double warmup_ratio, double base_lr, std::size_t step, std::size_t total_steps) {
  if (total_steps == 0) throw Error("lr_at: total_steps must be positive");
  if (step > total_steps) throw Error("lr_at: step beyond total_steps");
  const auto warmup =
      static_cast<std::size_t>(std::ceil(warmup_ratio * static_cast<double>(total_steps) - 1e-9));
  if (step < warmup) return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  if (warmup >= total_steps) return base_lr;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  if (schedule == Schedule::Cosine) return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return base_lr * (1.0 - progress);
}

std::size_t steps_per_epoch(std::size_t n_items, std::size_t batch_size) {
  return batch_size == 0 ? 0 : (n_items + batch_size - 1) / batch_size;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<EncodedSequence> encode_pairs(const ToyPolicy& policy, std::span<const PreferencePair> pairs,
                                          const TrainConfig& cfg, const CopMarkers& markers) {
  std::vector<EncodedSequence> seqs;
  seqs.reserve(2 * pairs.size());
  for (const auto& p : pairs) {
    for (const std::string* completion : {&p.chosen, &p.rejected}) {
      const std::size_t from = cfg.score_final_only ? final_response_offset(*completion, markers) : 0;
      seqs.push_back(policy.encode(p.prompt, *completion, from, cfg.max_length));
    }
  }
  return seqs;
}

DpoBatch batch_from_scores(const std::vector<double>& pol, const std::vector<double>& ref) {
  DpoBatch batch;
  batch.items.resize(pol.size() / 2);
  for (std::size_t i = 0; i < batch.items.size(); ++i)
    batch.items[i] = {pol[2 * i], pol[2 * i + 1], ref[2 * i], ref[2 * i + 1]};
  return batch;
}

PairMetrics summarize(const DpoBatch& batch, const DpoLoss& loss) {
  PairMetrics m;
  m.loss = loss.loss;
  std::vector<double> margins;
  std::vector<double> wins;
  for (const auto& item : batch.items) {
    const double z = item.margin();
    margins.push_back(z);
    wins.push_back(z > 0.0 ? 1.0 : (z == 0.0 ? 0.5 : 0.0));
  }
  const double n = static_cast<double>(batch.items.size());
  m.mean_margin = pairwise_sum(margins) / n;
  m.preference_accuracy = pairwise_sum(wins) / n;
  return m;
}

}  // namespace

DpoBatch score_pairs(const ToyPolicy& policy, const ToyPolicy& ref, std::span<const PreferencePair> pairs,
                     const TrainConfig& cfg, const CopMarkers& markers) {
  const auto seqs = encode_pairs(policy, pairs, cfg, markers);
  return batch_from_scores(kernels::score_batch(policy, seqs), kernels::score_batch(ref, seqs));
}

PairMetrics evaluate_pairs(const ToyPolicy& policy, const ToyPolicy& ref, std::span<const PreferencePair> pairs,
                           const TrainConfig& cfg, const CopMarkers& markers) {
  if (pairs.empty()) throw Error("evaluate_pairs: empty pair list");
  const DpoBatch batch = score_pairs(policy, ref, pairs, cfg, markers);
  return summarize(batch, dpo_loss(batch, cfg.beta));
}

DpoGradient dpo_gradient(const ToyPolicy& policy, const ToyPolicy& ref, std::span<const PreferencePair> pairs,
                         const TrainConfig& cfg, const CopMarkers& markers) {
  const auto seqs = encode_pairs(policy, pairs, cfg, markers);
  DpoGradient out;
  out.batch = batch_from_scores(kernels::score_batch(policy, seqs), kernels::score_batch(ref, seqs));
  out.loss = dpo_loss(out.batch, cfg.beta);

  std::vector<double> weights(seqs.size());
  for (std::size_t i = 0; i < out.batch.items.size(); ++i) {
    weights[2 * i] = out.loss.d_chosen[i];
    weights[2 * i + 1] = out.loss.d_rejected[i];
  }
  // d loss / dW = sum_i d_chosen_i * grad log pi(y+_i) + d_rejected_i * grad log pi(y-_i)
  out.grad.assign(policy.weights().size(), 0.0);
  kernels::accumulate_grad(policy, seqs, weights, out.grad);
  return out;
}

StepMetrics cspa_step(ToyPolicy& policy, const ToyPolicy& ref, std::span<const PreferencePair> pairs,
                      const TrainConfig& cfg, TrainerState& state, const CopMarkers& markers) {
  if (cfg.stage != Stage::Cspa) throw Error("cspa_step: config stage is not cspa");
  if (pairs.empty()) throw Error("cspa_step: empty pair list");
  if (state.optimizer.second_moment.empty())
    state.optimizer = make_optimizer_state(cfg.optimizer, policy.weights().size());

  const DpoGradient g = dpo_gradient(policy, ref, pairs, cfg, markers);
  StepMetrics out;
  static_cast<PairMetrics&>(out) = summarize(g.batch, g.loss);
  const std::size_t total = std::max(state.total_steps, state.step + 1);
  out.lr = lr_at(cfg.schedule, cfg.warmup_ratio, cfg.lr, state.step + 1, total);
  optimizer_step(cfg.optimizer, policy.weights(), g.grad, state.optimizer, out.lr, cfg.adamw, cfg.rmsprop);
  out.step = ++state.step;
  return out;
}

std::vector<StepMetrics> cspa_epoch(ToyPolicy& policy, const ToyPolicy& ref, std::span<const PreferencePair> pairs,
                                    const TrainConfig& cfg, TrainerState& state, std::size_t epoch_index,
                                    const CopMarkers& markers) {
  if (pairs.empty()) throw Error("cspa_epoch: empty pair list");
  const auto order = seeded_permutation(pairs.size(), mix_seed(cfg.seed, epoch_index));
  std::vector<StepMetrics> steps;
  for (std::size_t b = 0; b < pairs.size(); b += cfg.batch_size) {
    std::vector<PreferencePair> batch;
    for (std::size_t k = b; k < std::min(pairs.size(), b + cfg.batch_size); ++k) batch.push_back(pairs[order[k]]);
    steps.push_back(cspa_step(policy, ref, batch, cfg, state, markers));
  }
  return steps;
}

SftReport sft_train(ToyPolicy& policy, std::span<const SftExample> examples, const TrainConfig& cfg,
                    TrainerState* external_state) {
  if (cfg.stage != Stage::CopSft) throw Error("sft_train: config stage is not cop_sft");
  if (examples.empty()) throw Error("sft_train: empty corpus");
  TrainerState local;
  TrainerState& state = external_state ? *external_state : local;
  if (state.optimizer.second_moment.empty())
    state.optimizer = make_optimizer_state(cfg.optimizer, policy.weights().size());
  if (state.total_steps == 0) state.total_steps = cfg.epochs * steps_per_epoch(examples.size(), cfg.batch_size);

  std::vector<EncodedSequence> seqs;
  seqs.reserve(examples.size());
  for (const auto& ex : examples) {
    if (ex.target.empty()) throw Error("sft_train: empty target");
    if (ex.target.size() > cfg.max_length) throw Error("sft_train: target longer than max_length");
    seqs.push_back(policy.encode(ex.input, ex.target));
  }

  SftReport report;
  std::vector<double> grad(policy.weights().size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = seeded_permutation(seqs.size(), mix_seed(cfg.seed, epoch));
    std::vector<double> epoch_losses;
    for (std::size_t b = 0; b < seqs.size(); b += cfg.batch_size) {
      std::vector<EncodedSequence> batch;
      for (std::size_t k = b; k < std::min(seqs.size(), b + cfg.batch_size); ++k) batch.push_back(seqs[order[k]]);
      const auto scores = kernels::score_batch(policy, batch);
      std::vector<double> losses(scores.size());
      for (std::size_t i = 0; i < scores.size(); ++i) losses[i] = -scores[i];
      epoch_losses.insert(epoch_losses.end(), losses.begin(), losses.end());

      std::fill(grad.begin(), grad.end(), 0.0);
      const std::vector<double> weights(batch.size(), -1.0 / static_cast<double>(batch.size()));
      kernels::accumulate_grad(policy, batch, weights, grad);

      StepMetrics m;
      m.loss = pairwise_sum(losses) / static_cast<double>(losses.size());
      const std::size_t total = std::max(state.total_steps, state.step + 1);
      m.lr = lr_at(cfg.schedule, cfg.warmup_ratio, cfg.lr, state.step + 1, total);
      optimizer_step(cfg.optimizer, policy.weights(), grad, state.optimizer, m.lr, cfg.adamw, cfg.rmsprop);
      m.step = ++state.step;
      report.steps.push_back(m);
    }
    report.epoch_losses.push_back(pairwise_sum(epoch_losses) / static_cast<double>(epoch_losses.size()));
  }
  return report;
}

// ---------------------------------------------------------------------------

json checkpoint_to_json(const Checkpoint& ckpt) {
  json j;
  j["format"] = "pcl.toy_policy";
  j["version"] = 1;
  std::vector<int> alphabet(ckpt.policy.vocab().alphabet().begin(), ckpt.policy.vocab().alphabet().end());
  j["alphabet"] = alphabet;
  j["bos"] = ckpt.policy.vocab().bos();
  j["weights"] = std::vector<double>(ckpt.policy.weights().begin(), ckpt.policy.weights().end());
  if (ckpt.optimizer) {
    j["optimizer"] = {{"kind", to_string(ckpt.optimizer->kind)},
                      {"first_moment", ckpt.optimizer->first_moment},
                      {"second_moment", ckpt.optimizer->second_moment},
                      {"steps", ckpt.optimizer->steps}};
  } else {
    j["optimizer"] = nullptr;
  }
  j["step"] = ckpt.step;
  j["config_hash"] = ckpt.config_hash;
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  if (j.value("format", std::string{}) != "pcl.toy_policy") throw Error("not a toy policy checkpoint");
  if (j.value("version", 0) != 1) throw Error("unsupported checkpoint version");
  std::string alphabet;
  for (int b : j.at("alphabet").get<std::vector<int>>()) alphabet.push_back(static_cast<char>(b));
  ToyPolicy policy(Vocabulary::from_alphabet(alphabet, j.at("bos").get<std::size_t>()));
  const auto weights = j.at("weights").get<std::vector<double>>();
  if (weights.size() != policy.weights().size()) throw Error("checkpoint weight count does not match vocabulary");
  std::copy(weights.begin(), weights.end(), policy.weights().begin());
  Checkpoint ckpt{std::move(policy), std::nullopt, j.value("step", std::size_t{0}), j.value("config_hash", std::string{})};
  if (const auto& o = j.at("optimizer"); !o.is_null()) {
    OptimizerState s;
    s.kind = optimizer_from_string(o.at("kind").get<std::string>());
    s.first_moment = o.at("first_moment").get<std::vector<double>>();
    s.second_moment = o.at("second_moment").get<std::vector<double>>();
    s.steps = o.at("steps").get<std::size_t>();
    ckpt.optimizer = std::move(s);
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, checkpoint_to_json(ckpt).dump());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(json::parse(read_file(path))); }

std::string metrics_csv(std::span<const StepMetrics> steps) {
  std::ostringstream out;
  out.precision(17);
  out << "step,lr,loss,margin,pref_acc\n";
  for (const auto& s : steps)
    out << s.step << ',' << s.lr << ',' << s.loss << ',' << s.mean_margin << ',' << s.preference_accuracy << '\n';
  return out.str();
}

}  // namespace pcl
