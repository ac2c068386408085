#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcl/toy_policy.hpp"
#include "pcl/util.hpp"

namespace pcl {

struct GenRequest {
  std::string system_prompt;
  std::string prompt;
  std::size_t max_tokens = 256;
  double temperature = 1.0;
  std::optional<std::uint64_t> seed;
  std::size_t n_samples = 1;
  bool want_logprobs = false;
};

struct ScoredSequence {
  std::string text;
  /// Sum of per-token log-probabilities in nats, when the backend reports them.
  std::optional<double> logprob;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

class TransportError : public BackendError {
 public:
  TransportError(const std::string& what, std::size_t attempts)
      : BackendError(what + " (after " + std::to_string(attempts) + " attempts)"), attempts_(attempts) {}
  std::size_t attempts() const { return attempts_; }

 private:
  std::size_t attempts_;
};

class UnsupportedCapability : public BackendError {
 public:
  using BackendError::BackendError;
};

/// A text generator, optionally also a sequence scorer.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  /// Returns exactly req.n_samples sequences.
  virtual std::vector<ScoredSequence> generate(const GenRequest& req) = 0;
  virtual bool can_score() const { return false; }
  /// Sum of conditional token log-probabilities of completion given prompt.
  virtual double score(std::string_view prompt, std::string_view completion);
  /// Requests the caller may have outstanding at once.
  virtual std::size_t max_in_flight() const { return 1; }
};

/// Fans requests out up to backend.max_in_flight(); result i always answers request i.
std::vector<std::vector<ScoredSequence>> generate_many(Backend& backend, std::span<const GenRequest> requests);

/// Returns scripted texts in order, one per sample; errors once the script is exhausted.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(std::vector<std::string> script) : script_(std::move(script)) {}
  std::string name() const override { return "mock"; }
  std::vector<ScoredSequence> generate(const GenRequest& req) override;
  std::size_t consumed() const;
  std::size_t remaining() const;

 private:
  std::vector<std::string> script_;
  std::size_t next_ = 0;
  mutable std::mutex mutex_;
};

/// Generator defined by a callable; handy for prompt-dependent scripting in tests.
class FunctionBackend final : public Backend {
 public:
  using Fn = std::function<std::string(const GenRequest&, std::size_t sample_index)>;
  FunctionBackend(std::string name, Fn fn, std::size_t max_in_flight = 1)
      : name_(std::move(name)), fn_(std::move(fn)), in_flight_(max_in_flight) {}
  std::string name() const override { return name_; }
  std::vector<ScoredSequence> generate(const GenRequest& req) override;
  std::size_t max_in_flight() const override { return in_flight_; }

 private:
  std::string name_;
  Fn fn_;
  std::size_t in_flight_;
};

/// Samples from an immutable ToyPolicy. Sample s of a request uses seed mix_seed(req.seed, s),
/// so results do not depend on request order.
class ToyPolicyBackend final : public Backend {
 public:
  explicit ToyPolicyBackend(std::shared_ptr<const ToyPolicy> policy, std::size_t max_in_flight = 4)
      : policy_(std::move(policy)), in_flight_(max_in_flight) {}
  std::string name() const override { return "toy"; }
  std::vector<ScoredSequence> generate(const GenRequest& req) override;
  bool can_score() const override { return true; }
  double score(std::string_view prompt, std::string_view completion) override;
  std::size_t max_in_flight() const override { return in_flight_; }
  const ToyPolicy& policy() const { return *policy_; }

 private:
  std::shared_ptr<const ToyPolicy> policy_;
  std::size_t in_flight_;
};

struct RemoteConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4";
  /// Name of the environment variable holding the bearer token.
  std::string api_key_env = "OPENAI_API_KEY";
  double timeout_s = 60.0;
  std::size_t max_retries = 4;
  double backoff_base_s = 1.0;
  double backoff_ceiling_s = 30.0;
  std::size_t max_in_flight = 4;
  bool request_logprobs = false;

  json to_json() const;
  static RemoteConfig from_json(const json& j);
};

struct HttpResponse {
  int status = 0;  // 0 = transport failure
  std::string body;
  std::string error;
};

/// POST a JSON body. Exposed so other clients share the same transport.
HttpResponse http_post_json(const std::string& base_url, const std::string& path, const std::string& body,
                            const std::vector<std::pair<std::string, std::string>>& headers, double timeout_s);

/// Calls fn until it returns a non-retryable response, sleeping min(ceiling, base * 2^(k-1))
/// before retry k. Retryable: transport failure, 429, 5xx. Throws TransportError when exhausted.
HttpResponse post_with_retries(const std::function<HttpResponse()>& fn, std::size_t max_retries, double backoff_base_s,
                               double backoff_ceiling_s,
                               const std::function<void(std::chrono::duration<double>)>& sleep = {});

/// OpenAI-compatible chat-completions client. Cannot score arbitrary completions.
class RemoteChatBackend final : public Backend {
 public:
  explicit RemoteChatBackend(RemoteConfig cfg);
  std::string name() const override { return "remote:" + cfg_.model; }
  std::vector<ScoredSequence> generate(const GenRequest& req) override;
  std::size_t max_in_flight() const override { return cfg_.max_in_flight; }

  json build_request_body(const GenRequest& req) const;
  static std::vector<ScoredSequence> parse_response(const json& body, std::size_t expected_n);

 private:
  RemoteConfig cfg_;
};

}  // namespace pcl
