#include "pcl/kernels.hpp"

#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pcl::kernels {

namespace {

struct Transition {
  std::uint32_t next;
  double weight;
};

void check_grad_shape(const ToyPolicy& policy, std::span<const EncodedSequence> batch, std::span<const double> weights,
                      std::span<double> grad) {
  if (weights.size() != batch.size()) throw std::invalid_argument("weights/batch size mismatch");
  if (grad.size() != policy.weights().size()) throw std::invalid_argument("gradient shape mismatch");
}

// One transition's contribution to its row: w * (onehot(next) - softmax(row)).
inline void apply_transition(std::span<double> grad_row, std::span<const double> probs, std::uint32_t next, double w) {
  for (std::size_t j = 0; j < grad_row.size(); ++j) grad_row[j] -= w * probs[j];
  grad_row[next] += w;
}

}  // namespace

double sequence_logprob(const ToyPolicy& policy, const EncodedSequence& seq) {
  double total = 0.0;
  std::uint32_t prev = seq.start;
  for (std::size_t k = 0; k < seq.tokens.size(); ++k) {
    const std::uint32_t next = seq.tokens[k];
    if (k >= seq.score_from) {
      const auto row = policy.row(prev);
      total += row[next] - log_sum_exp(row);
    }
    prev = next;
  }
  return total;
}

std::vector<double> score_batch_serial(const ToyPolicy& policy, std::span<const EncodedSequence> batch) {
  std::vector<double> out(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) out[i] = sequence_logprob(policy, batch[i]);
  return out;
}

std::vector<double> score_batch_parallel(const ToyPolicy& policy, std::span<const EncodedSequence> batch) {
  std::vector<double> out(batch.size());
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = sequence_logprob(policy, batch[i]);
  return out;
}

void accumulate_grad_serial(const ToyPolicy& policy, std::span<const EncodedSequence> batch,
                            std::span<const double> weights, std::span<double> grad) {
  check_grad_shape(policy, batch, weights, grad);
  const std::size_t v = policy.vocab_size();
  std::vector<double> probs(v);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& seq = batch[i];
    std::uint32_t prev = seq.start;
    for (std::size_t k = 0; k < seq.tokens.size(); ++k) {
      const std::uint32_t next = seq.tokens[k];
      if (k >= seq.score_from && weights[i] != 0.0) {
        policy.softmax_row(prev, probs);
        apply_transition(grad.subspan(prev * v, v), probs, next, weights[i]);
      }
      prev = next;
    }
  }
}

void accumulate_grad_parallel(const ToyPolicy& policy, std::span<const EncodedSequence> batch,
                              std::span<const double> weights, std::span<double> grad) {
  check_grad_shape(policy, batch, weights, grad);
  const std::size_t v = policy.vocab_size();
  // Bucket transitions by source row, preserving (item, step) order so each row reduces exactly
  // as the serial loop does.
  std::vector<std::vector<Transition>> buckets(v);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const auto& seq = batch[i];
    std::uint32_t prev = seq.start;
    for (std::size_t k = 0; k < seq.tokens.size(); ++k) {
      if (k >= seq.score_from) buckets[prev].push_back({seq.tokens[k], weights[i]});
      prev = seq.tokens[k];
    }
  }
  const auto rows = static_cast<std::ptrdiff_t>(v);
#pragma omp parallel
  {
    std::vector<double> probs(v);
#pragma omp for schedule(dynamic, 4)
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      const auto& bucket = buckets[r];
      if (bucket.empty()) continue;
      policy.softmax_row(static_cast<std::size_t>(r), probs);
      auto grad_row = grad.subspan(static_cast<std::size_t>(r) * v, v);
      for (const auto& t : bucket) apply_transition(grad_row, probs, t.next, t.weight);
    }
  }
}

double max_row_normalization_error(const ToyPolicy& policy) {
  const std::size_t v = policy.vocab_size();
  std::vector<double> probs(v);
  double worst = 0.0;
  for (std::size_t r = 0; r < v; ++r) {
    policy.softmax_row(r, probs);
    double s = 0.0;
    for (double p : probs) s += p;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

}  // namespace pcl::kernels
