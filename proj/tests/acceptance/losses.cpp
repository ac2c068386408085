#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "acceptance.hpp"
#include "oracles.hpp"
#include "pcl/align.hpp"

namespace acceptance {

namespace {

constexpr double kIdentityTol = 1e-12;
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-5;
constexpr std::size_t kFdInstances = 100;

pcl::PreferencePair random_pair(std::mt19937_64& rng, std::string_view alphabet) {
  pcl::PreferencePair p;
  p.context_id = "pair-" + std::to_string(rng() % 100000);
  p.epoch = 1;
  p.prompt = oracle::random_text(rng, alphabet, 0, 12);
  p.chosen = oracle::random_text(rng, alphabet, 1, 24);
  p.rejected = oracle::random_text(rng, alphabet, 1, 24);
  return p;
}

}  // namespace

Outcome dpo_identity_point() {
  std::mt19937_64 rng(11);
  const std::string alphabet = "abcdefghij <>:\n";
  double worst = 0.0;
  std::size_t n_items = 0;
  for (std::size_t trial = 0; trial < 20; ++trial) {
    const auto policy = pcl::ToyPolicy::random(pcl::Vocabulary::from_alphabet(alphabet), 100 + trial, 3.0);
    const pcl::ToyPolicy ref = policy;
    std::vector<pcl::PreferencePair> pairs;
    for (int i = 0; i < 25; ++i) pairs.push_back(random_pair(rng, alphabet));
    for (double beta : {0.05, 0.1, 0.5}) {
      auto cfg = pcl::TrainConfig::defaults(pcl::Stage::Cspa);
      cfg.beta = beta;
      const auto loss = pcl::dpo_loss(pcl::score_pairs(policy, ref, pairs, cfg), beta);
      for (double l : loss.item_losses) worst = std::max(worst, std::abs(l - std::numbers::ln2));
      worst = std::max(worst, std::abs(loss.loss - std::numbers::ln2));
      n_items += loss.item_losses.size();
    }
  }
  std::ostringstream os;
  os << n_items << " pairs, max |loss - ln 2| = " << worst << " (tol " << kIdentityTol << ")";
  return {worst <= kIdentityTol, os.str()};
}

Outcome gradient_oracle() {
  std::mt19937_64 rng(23);
  const std::string symbols = "abcdefgh";
  double worst_sft = 0.0, worst_dpo = 0.0, worst_dpo_inputs = 0.0, worst_sft_value = 0.0;

  for (std::size_t inst = 0; inst < kFdInstances; ++inst) {
    const std::string alphabet = symbols.substr(0, 3 + rng() % 4);
    const auto vocab = pcl::Vocabulary::from_alphabet(alphabet);
    const auto policy = pcl::ToyPolicy::random(vocab, rng(), 1.5);
    const std::string prompt = oracle::random_text(rng, alphabet, 0, 5);
    const std::string target = oracle::random_text(rng, alphabet, 1, 10);

    const auto analytic = pcl::sft_loss(policy, prompt, target);
    const std::vector<double> w0(policy.weights().begin(), policy.weights().end());
    auto f = [&](const std::vector<double>& w) { return -oracle::bigram_logprob(vocab, w, prompt, target); };
    worst_sft = std::max(worst_sft, oracle::relative_error(analytic.grad, oracle::central_difference(f, w0, kFdStep)));
    worst_sft_value = std::max(worst_sft_value, std::abs(analytic.loss - static_cast<double>(f(w0))));
  }

  for (std::size_t inst = 0; inst < kFdInstances; ++inst) {
    const std::string alphabet = symbols.substr(0, 3 + rng() % 4);
    const auto vocab = pcl::Vocabulary::from_alphabet(alphabet);
    const auto policy = pcl::ToyPolicy::random(vocab, rng(), 1.5);
    const auto ref = pcl::ToyPolicy::random(vocab, rng(), 1.5);
    std::vector<pcl::PreferencePair> pairs;
    const std::size_t n = 1 + rng() % 4;
    for (std::size_t i = 0; i < n; ++i) {
      pcl::PreferencePair p;
      p.prompt = oracle::random_text(rng, alphabet, 0, 4);
      p.chosen = oracle::random_text(rng, alphabet, 1, 8);
      p.rejected = oracle::random_text(rng, alphabet, 1, 8);
      pairs.push_back(p);
    }
    auto cfg = pcl::TrainConfig::defaults(pcl::Stage::Cspa);
    cfg.beta = std::array{0.05, 0.1, 0.5, 2.0}[rng() % 4];
    const auto analytic = pcl::dpo_gradient(policy, ref, pairs, cfg);

    const std::vector<double> ref_w(ref.weights().begin(), ref.weights().end());
    auto f = [&](const std::vector<double>& w) {
      long double total = 0.0L;
      for (const auto& p : pairs) {
        const long double z = (oracle::bigram_logprob(vocab, w, p.prompt, p.chosen) -
                               oracle::bigram_logprob(vocab, ref_w, p.prompt, p.chosen)) -
                              (oracle::bigram_logprob(vocab, w, p.prompt, p.rejected) -
                               oracle::bigram_logprob(vocab, ref_w, p.prompt, p.rejected));
        total += oracle::dpo_item_loss(z, cfg.beta);
      }
      return total / static_cast<long double>(pairs.size());
    };
    const std::vector<double> w0(policy.weights().begin(), policy.weights().end());
    worst_dpo = std::max(worst_dpo, oracle::relative_error(analytic.grad, oracle::central_difference(f, w0, kFdStep)));

    // Derivatives with respect to the four log-probability inputs.
    std::vector<double> inputs;
    for (const auto& it : analytic.batch.items) inputs.insert(inputs.end(), {it.policy_chosen, it.policy_rejected});
    auto g = [&](const std::vector<double>& x) {
      pcl::DpoBatch b = analytic.batch;
      long double total = 0.0L;
      for (std::size_t i = 0; i < b.items.size(); ++i) {
        const long double z = (x[2 * i] - b.items[i].ref_chosen) - (x[2 * i + 1] - b.items[i].ref_rejected);
        total += oracle::dpo_item_loss(z, cfg.beta);
      }
      return total / static_cast<long double>(b.items.size());
    };
    std::vector<double> d_inputs;
    for (std::size_t i = 0; i < analytic.batch.items.size(); ++i)
      d_inputs.insert(d_inputs.end(), {analytic.loss.d_chosen[i], analytic.loss.d_rejected[i]});
    worst_dpo_inputs =
        std::max(worst_dpo_inputs, oracle::relative_error(d_inputs, oracle::central_difference(g, inputs, kFdStep)));
  }

  std::ostringstream os;
  os << kFdInstances << " sft + " << kFdInstances << " dpo instances, h = " << kFdStep
     << "; max rel err sft " << worst_sft << ", dpo(W) " << worst_dpo << ", dpo(logp) " << worst_dpo_inputs
     << " (tol " << kFdRelTol << "); max |sft loss - oracle| " << worst_sft_value;
  const bool pass = worst_sft < kFdRelTol && worst_dpo < kFdRelTol && worst_dpo_inputs < kFdRelTol &&
                    worst_sft_value < 1e-9;
  return {pass, os.str()};
}

}  // namespace acceptance
