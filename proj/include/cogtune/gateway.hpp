#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cogtune/util.hpp"

namespace cogtune {

enum class ModelRole { short_cot, long_cot, judge };
enum class Decoding { greedy };
enum class PrefillMode { native, emulate };

std::string_view to_string(ModelRole r);
ModelRole parse_model_role(std::string_view s);
std::string_view to_string(PrefillMode m);
PrefillMode parse_prefill_mode(std::string_view s);

struct GenerationRequest {
  ModelRole model_role = ModelRole::long_cot;
  std::string system_prompt;
  std::string user_prompt;
  std::optional<std::string> assistant_prefix;
  int max_new_tokens = 8192;
  Decoding decoding = Decoding::greedy;
};

struct GenerationResult {
  std::string text;  // continuation only, never includes the forced prefix
  std::optional<int> prompt_tokens;
  std::optional<int> completion_tokens;
  double latency_seconds = 0.0;
  bool reached_max_length = false;
  bool cache_hit = false;
  bool emulated_prefix = false;
  std::string finish_reason;
};

class GatewayError : public Error {
 public:
  GatewayError(const std::string& what, bool retryable, int status,
               std::vector<std::string> attempts)
      : Error(what), retryable_(retryable), status_(status), attempts_(std::move(attempts)) {}

  bool retryable() const { return retryable_; }
  /// HTTP status of the last attempt, 0 for transport failures.
  int status() const { return status_; }
  const std::vector<std::string>& attempts() const { return attempts_; }

 private:
  bool retryable_;
  int status_;
  std::vector<std::string> attempts_;
};

/// The provider refused an assistant-prefilled turn.
class PrefillRejectedError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

// ---------------------------------------------------------------------------
// Transports
// ---------------------------------------------------------------------------

struct HttpReply {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

/// Thrown by transports for connection failures and timeouts.
class TransportError : public Error {
 public:
  using Error::Error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpReply post(const std::string& url, const std::string& body,
                         const HttpHeaders& headers, double timeout_seconds) = 0;
};

/// cpp-httplib client; http:// and https:// URLs.
class HttpTransport final : public Transport {
 public:
  HttpReply post(const std::string& url, const std::string& body, const HttpHeaders& headers,
                 double timeout_seconds) override;
};

/// One canned reply. Matches when `model` is empty or equal to the request's
/// model and `contains` occurs in the concatenated message contents; the
/// longest `contains` wins.
struct MockFixture {
  std::string model;
  std::string contains;
  std::string response;
  std::string finish_reason = "stop";
  std::optional<int> completion_tokens;
  int status = 200;
};

/// Offline chat-completions endpoint backed by fixtures.
class MockTransport final : public Transport {
 public:
  MockTransport() = default;
  explicit MockTransport(std::vector<MockFixture> fixtures) : fixtures_(std::move(fixtures)) {}

  /// Reads fixtures.jsonl: {"model","contains","response","finish_reason",
  /// "completion_tokens","status"}.
  static std::shared_ptr<MockTransport> from_file(const std::filesystem::path& path);

  void add(MockFixture f);
  void set_delay(std::chrono::milliseconds d) { delay_ = d; }
  /// Answer 400 to any request whose last message is from the assistant.
  void set_reject_prefill(bool v) { reject_prefill_ = v; }

  HttpReply post(const std::string& url, const std::string& body, const HttpHeaders& headers,
                 double timeout_seconds) override;

  std::size_t calls() const { return calls_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }
  /// Bodies of every request seen, in arrival order.
  std::vector<nlohmann::json> requests() const;

 private:
  std::vector<MockFixture> fixtures_;
  std::chrono::milliseconds delay_{0};
  bool reject_prefill_ = false;
  std::atomic<std::size_t> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  mutable std::mutex mu_;
  std::vector<nlohmann::json> requests_;
};

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

struct EndpointConfig {
  std::string url;  // full chat-completions URL
  std::string model;
  std::string api_key_env = "TH2T_API_KEY";
};

struct RetryPolicy {
  int max_attempts = 3;
  std::vector<double> backoff_seconds = {1.0, 4.0, 16.0};
};

struct GatewayConfig {
  std::map<ModelRole, EndpointConfig> endpoints;
  RetryPolicy retry;
  PrefillMode prefill_mode = PrefillMode::native;
  /// Merged into the request body when a native assistant prefill is sent.
  nlohmann::json prefill_fields = {{"continue_final_message", true},
                                   {"add_generation_prompt", false}};
  /// Appended to the user turn when emulating a prefill; {prefix} is replaced.
  std::string emulation_instruction =
      "Begin your reply with exactly the following text, then continue from it:\n{prefix}";
  double timeout_seconds = 600.0;
  std::filesystem::path cache_dir;  // empty: in-memory cache only
};

/// Append-only content-addressed store of generation results. Entries are
/// written once, atomically, under <dir>/<hh>/<digest>.json.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::optional<GenerationResult> get(const std::string& digest);
  void put(const std::string& digest, const nlohmann::json& key, const GenerationResult& r);

 private:
  std::filesystem::path path_for(const std::string& digest) const;

  std::filesystem::path dir_;
  std::mutex mu_;
  std::unordered_map<std::string, GenerationResult> memory_;
};

struct BatchItem {
  std::optional<GenerationResult> result;
  std::string error;

  bool ok() const { return result.has_value(); }
};

class ModelGateway {
 public:
  using Sleeper = std::function<void(double seconds)>;

  ModelGateway(GatewayConfig config, std::shared_ptr<Transport> transport,
               Sleeper sleeper = nullptr);

  /// Requests carrying an assistant_prefix are routed through the prefix path.
  GenerationResult generate(const GenerationRequest& request);

  /// Continues an assistant turn that already holds `prefix`. The full
  /// response is prefix + result.text.
  GenerationResult generate_with_prefix(GenerationRequest request, const std::string& prefix);

  /// Results in input order; at most `parallelism` requests in flight; one
  /// failing item never aborts the batch.
  std::vector<BatchItem> collect_batch(const std::vector<GenerationRequest>& requests,
                                       int parallelism);

  /// Canonical cache key for a request (exposed for tests and manifests).
  nlohmann::json cache_key(const GenerationRequest& request) const;

  std::size_t network_calls() const { return network_calls_.load(); }
  const GatewayConfig& config() const { return config_; }

 private:
  const EndpointConfig& endpoint(ModelRole role) const;
  GenerationResult run(const GenerationRequest& request, bool emulate);
  HttpReply post_with_retries(const EndpointConfig& ep, const std::string& body, bool has_prefill);

  GatewayConfig config_;
  std::shared_ptr<Transport> transport_;
  Sleeper sleeper_;
  ResponseCache cache_;
  std::atomic<std::size_t> network_calls_{0};
};

}  // namespace cogtune
