#include "pcl/backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace pcl {

double Backend::score(std::string_view, std::string_view) {
  throw UnsupportedCapability("backend '" + name() + "' cannot score sequences");
}

std::vector<std::vector<ScoredSequence>> generate_many(Backend& backend, std::span<const GenRequest> requests) {
  std::vector<std::vector<ScoredSequence>> results(requests.size());
  bounded_for(requests.size(), backend.max_in_flight(), [&](std::size_t i) { results[i] = backend.generate(requests[i]); });
  return results;
}

std::vector<ScoredSequence> MockBackend::generate(const GenRequest& req) {
  if (req.n_samples == 0) throw BackendError("n_samples must be at least 1");
  std::lock_guard lock(mutex_);
  if (next_ + req.n_samples > script_.size())
    throw BackendError("mock script exhausted after " + std::to_string(script_.size()) + " entries");
  std::vector<ScoredSequence> out;
  for (std::size_t s = 0; s < req.n_samples; ++s) out.push_back({script_[next_++], std::nullopt});
  return out;
}

std::size_t MockBackend::consumed() const {
  std::lock_guard lock(mutex_);
  return next_;
}

std::size_t MockBackend::remaining() const {
  std::lock_guard lock(mutex_);
  return script_.size() - next_;
}

std::vector<ScoredSequence> FunctionBackend::generate(const GenRequest& req) {
  if (req.n_samples == 0) throw BackendError("n_samples must be at least 1");
  std::vector<ScoredSequence> out;
  for (std::size_t s = 0; s < req.n_samples; ++s) out.push_back({fn_(req, s), std::nullopt});
  return out;
}

std::vector<ScoredSequence> ToyPolicyBackend::generate(const GenRequest& req) {
  if (req.n_samples == 0) throw BackendError("n_samples must be at least 1");
  std::vector<ScoredSequence> out;
  for (std::size_t s = 0; s < req.n_samples; ++s) {
    const std::uint64_t seed = mix_seed(req.seed.value_or(0), s);
    std::string text = policy_->sample(req.prompt, req.max_tokens, req.temperature, seed);
    const double lp = policy_->logprob(req.prompt, text);
    out.push_back({std::move(text), lp});
  }
  return out;
}

double ToyPolicyBackend::score(std::string_view prompt, std::string_view completion) {
  return policy_->logprob(prompt, completion);
}

json RemoteConfig::to_json() const {
  return {{"base_url", base_url},         {"path", path},
          {"model", model},               {"api_key_env", api_key_env},
          {"timeout_s", timeout_s},       {"max_retries", max_retries},
          {"backoff_base_s", backoff_base_s}, {"backoff_ceiling_s", backoff_ceiling_s},
          {"max_in_flight", max_in_flight}, {"request_logprobs", request_logprobs}};
}

RemoteConfig RemoteConfig::from_json(const json& j) {
  RemoteConfig c;
  c.base_url = j.value("base_url", c.base_url);
  c.path = j.value("path", c.path);
  c.model = j.value("model", c.model);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.backoff_base_s = j.value("backoff_base_s", c.backoff_base_s);
  c.backoff_ceiling_s = j.value("backoff_ceiling_s", c.backoff_ceiling_s);
  c.max_in_flight = std::max<std::size_t>(1, j.value("max_in_flight", c.max_in_flight));
  c.request_logprobs = j.value("request_logprobs", c.request_logprobs);
  return c;
}

HttpResponse post_with_retries(const std::function<HttpResponse()>& fn, std::size_t max_retries, double backoff_base_s,
                               double backoff_ceiling_s,
                               const std::function<void(std::chrono::duration<double>)>& sleep) {
  const std::size_t attempts_allowed = max_retries + 1;
  HttpResponse last;
  for (std::size_t attempt = 1; attempt <= attempts_allowed; ++attempt) {
    if (attempt > 1) {
      const double delay = std::min(backoff_ceiling_s, backoff_base_s * std::pow(2.0, double(attempt - 2)));
      const auto d = std::chrono::duration<double>(delay);
      if (sleep) {
        sleep(d);
      } else {
        std::this_thread::sleep_for(d);
      }
    }
    last = fn();
    const bool retryable = last.status == 0 || last.status == 429 || last.status >= 500;
    if (!retryable) return last;
  }
  const std::string reason = last.status == 0 ? "transport failure: " + last.error
                                              : "HTTP " + std::to_string(last.status);
  throw TransportError(reason, attempts_allowed);
}

RemoteChatBackend::RemoteChatBackend(RemoteConfig cfg) : cfg_(std::move(cfg)) {}

json RemoteChatBackend::build_request_body(const GenRequest& req) const {
  json messages = json::array();
  if (!req.system_prompt.empty()) messages.push_back({{"role", "system"}, {"content", req.system_prompt}});
  messages.push_back({{"role", "user"}, {"content", req.prompt}});
  json body = {{"model", cfg_.model},
               {"messages", std::move(messages)},
               {"temperature", req.temperature},
               {"max_tokens", req.max_tokens},
               {"n", req.n_samples}};
  if (req.seed) body["seed"] = *req.seed;
  if (req.want_logprobs || cfg_.request_logprobs) body["logprobs"] = true;
  return body;
}

std::vector<ScoredSequence> RemoteChatBackend::parse_response(const json& body, std::size_t expected_n) {
  if (!body.contains("choices") || !body["choices"].is_array()) throw BackendError("response has no choices array");
  std::vector<std::pair<std::size_t, ScoredSequence>> indexed;
  std::size_t position = 0;
  for (const auto& choice : body["choices"]) {
    const std::size_t index = choice.value("index", position);
    ++position;
    ScoredSequence seq;
    const auto& message = choice.at("message");
    seq.text = message.at("content").is_null() ? std::string{} : message.at("content").get<std::string>();
    if (auto lp = choice.find("logprobs"); lp != choice.end() && lp->is_object() && lp->contains("content") &&
                                           (*lp)["content"].is_array()) {
      double total = 0.0;
      for (const auto& tok : (*lp)["content"]) total += tok.at("logprob").get<double>();
      seq.logprob = total;
    }
    indexed.emplace_back(index, std::move(seq));
  }
  std::sort(indexed.begin(), indexed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  if (indexed.size() != expected_n)
    throw BackendError("expected " + std::to_string(expected_n) + " choices, got " + std::to_string(indexed.size()));
  std::vector<ScoredSequence> out;
  for (auto& [_, seq] : indexed) out.push_back(std::move(seq));
  return out;
}

std::vector<ScoredSequence> RemoteChatBackend::generate(const GenRequest& req) {
  if (req.n_samples == 0) throw BackendError("n_samples must be at least 1");
  std::vector<std::pair<std::string, std::string>> headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  const std::string body = build_request_body(req).dump();
  const HttpResponse resp = post_with_retries(
      [&] { return http_post_json(cfg_.base_url, cfg_.path, body, headers, cfg_.timeout_s); }, cfg_.max_retries,
      cfg_.backoff_base_s, cfg_.backoff_ceiling_s);
  if (resp.status != 200)
    throw BackendError("HTTP " + std::to_string(resp.status) + " from " + cfg_.base_url + cfg_.path + ": " + resp.body);
  json parsed;
  try {
    parsed = json::parse(resp.body);
  } catch (const json::parse_error& e) {
    throw BackendError(std::string("malformed completion response: ") + e.what());
  }
  return parse_response(parsed, req.n_samples);
}

}  // namespace pcl
