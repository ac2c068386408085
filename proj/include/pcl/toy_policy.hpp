#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcl/util.hpp"

namespace pcl {

class VocabError : public Error {
 public:
  using Error::Error;
};

/// Ordered byte alphabet. One entry is the designated BOS row used when the prompt is empty.
class Vocabulary {
 public:
  /// All 256 byte values, BOS = byte 0.
  static Vocabulary bytes();
  static Vocabulary from_alphabet(std::string_view alphabet, std::size_t bos_index = 0);

  std::size_t size() const { return alphabet_.size(); }
  std::size_t bos() const { return bos_; }
  unsigned char symbol(std::size_t index) const { return alphabet_[index]; }
  const std::vector<unsigned char>& alphabet() const { return alphabet_; }
  /// Throws VocabError for bytes outside the alphabet.
  std::uint32_t index_of(unsigned char byte) const;
  bool contains(unsigned char byte) const { return index_[byte] >= 0; }

  bool operator==(const Vocabulary& other) const { return alphabet_ == other.alphabet_ && bos_ == other.bos_; }

 private:
  std::vector<unsigned char> alphabet_;
  std::array<int, 256> index_{};
  std::size_t bos_ = 0;
};

/// A completion encoded against a prompt. Transition k goes from (k == 0 ? start : tokens[k-1])
/// to tokens[k]; only transitions with k >= score_from contribute to the log-probability.
struct EncodedSequence {
  std::uint32_t start = 0;
  std::vector<std::uint32_t> tokens;
  std::size_t score_from = 0;
};

/// Bigram categorical policy: log pi(y|x) = sum_k log softmax(W[prev_k])[y_k], where the first
/// prev is the last prompt token (BOS row for an empty prompt).
class ToyPolicy {
 public:
  explicit ToyPolicy(Vocabulary vocab);
  static ToyPolicy random(Vocabulary vocab, std::uint64_t seed, double scale);

  const Vocabulary& vocab() const { return vocab_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  std::span<const double> weights() const { return weights_; }
  std::span<double> weights() { return weights_; }
  std::span<const double> row(std::size_t r) const { return std::span(weights_).subspan(r * vocab_size(), vocab_size()); }
  std::span<double> row(std::size_t r) { return std::span(weights_).subspan(r * vocab_size(), vocab_size()); }
  double& at(std::size_t r, std::size_t c) { return weights_[r * vocab_size() + c]; }
  double at(std::size_t r, std::size_t c) const { return weights_[r * vocab_size() + c]; }

  std::uint32_t start_state(std::string_view prompt) const;
  /// Completions longer than max_tokens are cut to their first max_tokens bytes (0 = no limit).
  EncodedSequence encode(std::string_view prompt, std::string_view completion, std::size_t score_from_byte = 0,
                         std::size_t max_tokens = 0) const;

  void softmax_row(std::size_t r, std::span<double> out, double temperature = 1.0) const;
  double logprob(std::string_view prompt, std::string_view completion) const;

  std::string greedy(std::string_view prompt, std::size_t max_tokens) const;
  std::string sample(std::string_view prompt, std::size_t max_tokens, double temperature, std::uint64_t seed) const;

  bool operator==(const ToyPolicy& other) const { return vocab_ == other.vocab_ && weights_ == other.weights_; }

 private:
  Vocabulary vocab_;
  std::vector<double> weights_;
};

/// Numerically stable log(sum(exp(row))).
double log_sum_exp(std::span<const double> row);

}  // namespace pcl
