#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcl/cop.hpp"
#include "pcl/datasets.hpp"
#include "pcl/toy_policy.hpp"

namespace pcl {

enum class Stage { CopSft, Cspa };
enum class OptimizerKind { AdamW, RmsProp };
enum class Schedule { Cosine, Linear };

std::string_view to_string(Stage s);
std::string_view to_string(OptimizerKind k);
std::string_view to_string(Schedule s);
Stage stage_from_string(std::string_view s);
OptimizerKind optimizer_from_string(std::string_view s);
Schedule schedule_from_string(std::string_view s);

struct AdamWParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct RmsPropParams {
  double alpha = 0.99;
  double eps = 1e-8;
};

struct TrainConfig {
  Stage stage = Stage::CopSft;
  OptimizerKind optimizer = OptimizerKind::AdamW;
  double lr = 5e-6;
  double warmup_ratio = 0.1;
  Schedule schedule = Schedule::Cosine;
  std::size_t batch_size = 8;
  std::size_t max_length = 2048;
  std::size_t epochs = 3;
  /// DPO temperature. The sensitivity grid {0.05, 0.1, 0.5} is run through config.
  double beta = 0.1;
  /// Score only the final response a_f instead of the whole chain + response.
  bool score_final_only = false;
  /// Re-anchor the reference to the current policy at the start of each self-play epoch.
  bool refresh_reference = false;
  std::uint64_t seed = 0;
  AdamWParams adamw;
  RmsPropParams rmsprop;

  /// cop_sft: adamw 5e-6 warmup 0.1 cosine 3 epochs; cspa: rmsprop 5e-7 warmup 0.2 linear 2 epochs.
  static TrainConfig defaults(Stage stage);
  json to_json() const;
  static TrainConfig from_json(const json& j, Stage stage);
};

// ---------------------------------------------------------------------------
// Losses

struct SftLoss {
  double loss = 0.0;
  std::vector<double> grad;  // V x V, row-major
};

/// -log pi(target | prompt) and its exact gradient with respect to W.
SftLoss sft_loss(const ToyPolicy& policy, std::string_view prompt, std::string_view target,
                 std::size_t max_length = 2048);

struct DpoItem {
  double policy_chosen = 0.0;
  double policy_rejected = 0.0;
  double ref_chosen = 0.0;
  double ref_rejected = 0.0;

  /// (log pi(y+) - log ref(y+)) - (log pi(y-) - log ref(y-))
  double margin() const { return (policy_chosen - ref_chosen) - (policy_rejected - ref_rejected); }
};

struct DpoBatch {
  std::vector<DpoItem> items;
};

struct DpoLoss {
  double loss = 0.0;
  std::vector<double> item_losses;
  std::vector<double> d_chosen;    // d loss / d policy_chosen_i
  std::vector<double> d_rejected;  // d loss / d policy_rejected_i
};

double softplus(double x);
double sigmoid(double x);

/// Mean over items of -log sigmoid(beta * z_i), computed as softplus(-beta * z_i).
DpoLoss dpo_loss(const DpoBatch& batch, double beta);

// ---------------------------------------------------------------------------
// Optimizers and schedules

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::AdamW;
  std::vector<double> first_moment;   // adamw only
  std::vector<double> second_moment;  // adamw v / rmsprop square average
  std::size_t steps = 0;

  bool operator==(const OptimizerState&) const = default;
};

OptimizerState make_optimizer_state(OptimizerKind kind, std::size_t n_params);

/// One update of params in place; state advances by one step.
void optimizer_step(OptimizerKind kind, std::span<double> params, std::span<const double> grads,
                    OptimizerState& state, double lr, const AdamWParams& adamw = {}, const RmsPropParams& rms = {});

/// Linear warmup from 0 over ceil(warmup_ratio * total_steps) steps, then cosine or linear decay to 0.
double lr_at(Schedule schedule, double warmup_ratio, double base_lr, std::size_t step, std::size_t total_steps);

struct TrainerState {
  OptimizerState optimizer;
  /// Updates applied so far; update k (1-based) uses lr_at(k).
  std::size_t step = 0;
  std::size_t total_steps = 0;
};

// ---------------------------------------------------------------------------
// Training

struct PairMetrics {
  double loss = 0.0;
  double mean_margin = 0.0;
  /// Fraction of pairs with z > 0; ties (z = 0) count one half, so the identity point reads 0.5.
  double preference_accuracy = 0.0;
};

struct StepMetrics : PairMetrics {
  std::size_t step = 0;
  double lr = 0.0;
};

/// DPO batch for pairs: policy and reference log-probabilities of chosen and rejected given x.
DpoBatch score_pairs(const ToyPolicy& policy, const ToyPolicy& ref, std::span<const PreferencePair> pairs,
                     const TrainConfig& cfg, const CopMarkers& markers = {});

/// Loss, margin and accuracy on a frozen pair set without updating anything.
PairMetrics evaluate_pairs(const ToyPolicy& policy, const ToyPolicy& ref, std::span<const PreferencePair> pairs,
                           const TrainConfig& cfg, const CopMarkers& markers = {});

struct DpoGradient {
  DpoBatch batch;
  DpoLoss loss;
  std::vector<double> grad;  // d loss / d W, V x V row-major
};

/// Batch DPO loss on `pairs` and its exact gradient with respect to the policy weights.
DpoGradient dpo_gradient(const ToyPolicy& policy, const ToyPolicy& ref, std::span<const PreferencePair> pairs,
                         const TrainConfig& cfg, const CopMarkers& markers = {});

/// One DPO optimizer step on `pairs`. Metrics describe the batch before the update.
StepMetrics cspa_step(ToyPolicy& policy, const ToyPolicy& ref, std::span<const PreferencePair> pairs,
                      const TrainConfig& cfg, TrainerState& state, const CopMarkers& markers = {});

/// One pass over `pairs` in seeded mini-batches.
std::vector<StepMetrics> cspa_epoch(ToyPolicy& policy, const ToyPolicy& ref, std::span<const PreferencePair> pairs,
                                    const TrainConfig& cfg, TrainerState& state, std::size_t epoch_index,
                                    const CopMarkers& markers = {});

struct SftReport {
  /// Mean training loss per epoch, accumulated during the pass.
  std::vector<double> epoch_losses;
  std::vector<StepMetrics> steps;
};

SftReport sft_train(ToyPolicy& policy, std::span<const SftExample> examples, const TrainConfig& cfg,
                    TrainerState* state = nullptr);

std::size_t steps_per_epoch(std::size_t n_items, std::size_t batch_size);

// ---------------------------------------------------------------------------
// Checkpoints and metrics

struct Checkpoint {
  ToyPolicy policy;
  std::optional<OptimizerState> optimizer;
  std::size_t step = 0;
  std::string config_hash;
};

json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const json& j);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// CSV with header "step,lr,loss,margin,pref_acc".
std::string metrics_csv(std::span<const StepMetrics> steps);

}  // namespace pcl
