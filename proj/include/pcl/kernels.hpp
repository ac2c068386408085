#pragma once

#include <span>
#include <vector>

#include "pcl/toy_policy.hpp"

// Batch kernels over ToyPolicy sequences. Each operation has a serial reference and an OpenMP
// version; the two are bit-identical because every output element is reduced in the same order.
namespace pcl::kernels {

double sequence_logprob(const ToyPolicy& policy, const EncodedSequence& seq);

std::vector<double> score_batch_serial(const ToyPolicy& policy, std::span<const EncodedSequence> batch);
std::vector<double> score_batch_parallel(const ToyPolicy& policy, std::span<const EncodedSequence> batch);

/// grad += sum_i weights[i] * d log pi(batch[i]) / dW, row-major V x V.
void accumulate_grad_serial(const ToyPolicy& policy, std::span<const EncodedSequence> batch,
                            std::span<const double> weights, std::span<double> grad);
void accumulate_grad_parallel(const ToyPolicy& policy, std::span<const EncodedSequence> batch,
                              std::span<const double> weights, std::span<double> grad);

/// Largest |sum(softmax(row)) - 1| over all rows.
double max_row_normalization_error(const ToyPolicy& policy);

/// Dispatches to the parallel kernels when built with OpenMP, the serial ones otherwise.
inline std::vector<double> score_batch(const ToyPolicy& policy, std::span<const EncodedSequence> batch) {
  return score_batch_parallel(policy, batch);
}
inline void accumulate_grad(const ToyPolicy& policy, std::span<const EncodedSequence> batch,
                            std::span<const double> weights, std::span<double> grad) {
  accumulate_grad_parallel(policy, batch, weights, grad);
}

}  // namespace pcl::kernels
