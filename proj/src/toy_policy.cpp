#include "pcl/toy_policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "pcl/kernels.hpp"

namespace pcl {

Vocabulary Vocabulary::bytes() {
  std::string all(256, '\0');
  for (int i = 0; i < 256; ++i) all[i] = static_cast<char>(i);
  return from_alphabet(all, 0);
}

Vocabulary Vocabulary::from_alphabet(std::string_view alphabet, std::size_t bos_index) {
  Vocabulary v;
  v.index_.fill(-1);
  for (char c : alphabet) {
    const auto b = static_cast<unsigned char>(c);
    if (v.index_[b] >= 0) throw VocabError("duplicate byte in alphabet");
    v.index_[b] = static_cast<int>(v.alphabet_.size());
    v.alphabet_.push_back(b);
  }
  if (v.alphabet_.empty()) throw VocabError("empty alphabet");
  if (bos_index >= v.alphabet_.size()) throw VocabError("BOS index out of range");
  v.bos_ = bos_index;
  return v;
}

std::uint32_t Vocabulary::index_of(unsigned char byte) const {
  const int i = index_[byte];
  if (i < 0) throw VocabError("byte " + std::to_string(int(byte)) + " is outside the vocabulary");
  return static_cast<std::uint32_t>(i);
}

ToyPolicy::ToyPolicy(Vocabulary vocab) : vocab_(std::move(vocab)), weights_(vocab_.size() * vocab_.size(), 0.0) {}

ToyPolicy ToyPolicy::random(Vocabulary vocab, std::uint64_t seed, double scale) {
  ToyPolicy p(std::move(vocab));
  std::mt19937_64 rng(seed);
  for (double& w : p.weights_) {
    // Uniform in [-scale, scale] from the raw 53-bit mantissa, portable across stdlibs.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    w = scale * (2.0 * u - 1.0);
  }
  return p;
}

std::uint32_t ToyPolicy::start_state(std::string_view prompt) const {
  if (prompt.empty()) return static_cast<std::uint32_t>(vocab_.bos());
  return vocab_.index_of(static_cast<unsigned char>(prompt.back()));
}

EncodedSequence ToyPolicy::encode(std::string_view prompt, std::string_view completion, std::size_t score_from_byte,
                                  std::size_t max_tokens) const {
  if (max_tokens > 0 && completion.size() > max_tokens) completion = completion.substr(0, max_tokens);
  EncodedSequence seq;
  seq.start = start_state(prompt);
  seq.tokens.reserve(completion.size());
  for (char c : completion) seq.tokens.push_back(vocab_.index_of(static_cast<unsigned char>(c)));
  seq.score_from = std::min(score_from_byte, seq.tokens.size());
  return seq;
}

double log_sum_exp(std::span<const double> row) {
  const double mx = *std::max_element(row.begin(), row.end());
  double acc = 0.0;
  for (double w : row) acc += std::exp(w - mx);
  return mx + std::log(acc);
}

void ToyPolicy::softmax_row(std::size_t r, std::span<double> out, double temperature) const {
  const auto w = row(r);
  const double mx = *std::max_element(w.begin(), w.end());
  double acc = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    out[j] = std::exp((w[j] - mx) / temperature);
    acc += out[j];
  }
  for (auto& p : out) p /= acc;
}

double ToyPolicy::logprob(std::string_view prompt, std::string_view completion) const {
  return kernels::sequence_logprob(*this, encode(prompt, completion));
}

std::string ToyPolicy::greedy(std::string_view prompt, std::size_t max_tokens) const {
  std::string out;
  std::size_t state = start_state(prompt);
  for (std::size_t k = 0; k < max_tokens; ++k) {
    const auto w = row(state);
    state = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
    out.push_back(static_cast<char>(vocab_.symbol(state)));
  }
  return out;
}

std::string ToyPolicy::sample(std::string_view prompt, std::size_t max_tokens, double temperature,
                              std::uint64_t seed) const {
  if (temperature <= 0.0) return greedy(prompt, max_tokens);
  std::mt19937_64 rng(seed);
  std::vector<double> probs(vocab_size());
  std::string out;
  std::size_t state = start_state(prompt);
  for (std::size_t k = 0; k < max_tokens; ++k) {
    softmax_row(state, probs, temperature);
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    double cum = 0.0;
    std::size_t next = probs.size() - 1;
    for (std::size_t j = 0; j < probs.size(); ++j) {
      cum += probs[j];
      if (u < cum) {
        next = j;
        break;
      }
    }
    state = next;
    out.push_back(static_cast<char>(vocab_.symbol(state)));
  }
  return out;
}

}  // namespace pcl
