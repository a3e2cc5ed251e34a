#include "cogtune/gateway.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "cogtune/trace.hpp"

namespace cogtune {

using nlohmann::json;

std::string_view to_string(ModelRole r) {
  switch (r) {
    case ModelRole::short_cot: return "short_cot";
    case ModelRole::long_cot: return "long_cot";
    case ModelRole::judge: return "judge";
  }
  return "long_cot";
}

ModelRole parse_model_role(std::string_view s) {
  if (s == "short_cot") return ModelRole::short_cot;
  if (s == "long_cot") return ModelRole::long_cot;
  if (s == "judge") return ModelRole::judge;
  throw Error("unknown model role '" + std::string(s) + "'");
}

std::string_view to_string(PrefillMode m) {
  return m == PrefillMode::native ? "native" : "emulate";
}

PrefillMode parse_prefill_mode(std::string_view s) {
  if (s == "native") return PrefillMode::native;
  if (s == "emulate") return PrefillMode::emulate;
  throw Error("unknown prefill mode '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// HttpTransport
// ---------------------------------------------------------------------------

HttpReply HttpTransport::post(const std::string& url, const std::string& body,
                              const HttpHeaders& headers, double timeout_seconds) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw TransportError("malformed URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  const auto secs = static_cast<time_t>(timeout_seconds);
  const auto usecs = static_cast<time_t>((timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(10, 0);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(path, h, body, "application/json");
  if (!res) {
    throw TransportError("POST " + url + " failed: " + httplib::to_string(res.error()));
  }
  return {res->status, res->body};
}

// ---------------------------------------------------------------------------
// MockTransport
// ---------------------------------------------------------------------------

std::shared_ptr<MockTransport> MockTransport::from_file(const std::filesystem::path& path) {
  auto mock = std::make_shared<MockTransport>();
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_view(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      MockFixture f;
      f.model = j.value("model", "");
      f.contains = j.value("contains", "");
      f.response = j.value("response", "");
      f.finish_reason = j.value("finish_reason", "stop");
      if (j.contains("completion_tokens") && !j["completion_tokens"].is_null()) {
        f.completion_tokens = j["completion_tokens"].get<int>();
      }
      f.status = j.value("status", 200);
      mock->add(std::move(f));
    } catch (const std::exception& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return mock;
}

void MockTransport::add(MockFixture f) {
  std::lock_guard lock(mu_);
  fixtures_.push_back(std::move(f));
}

std::vector<json> MockTransport::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

HttpReply MockTransport::post(const std::string& /*url*/, const std::string& body,
                              const HttpHeaders& /*headers*/, double /*timeout_seconds*/) {
  ++calls_;
  const int now = ++in_flight_;
  int seen = max_in_flight_.load();
  while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
  }
  struct Leave {
    std::atomic<int>& n;
    ~Leave() { --n; }
  } leave{in_flight_};

  if (delay_.count() > 0) std::this_thread::sleep_for(delay_);

  const auto request = json::parse(body);
  std::string model = request.value("model", "");
  std::string haystack;
  bool last_is_assistant = false;
  for (const auto& m : request.at("messages")) {
    haystack += m.value("content", "");
    haystack += '\n';
    last_is_assistant = m.value("role", "") == "assistant";
  }

  std::optional<MockFixture> hit;
  {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
    if (reject_prefill_ && last_is_assistant) {
      return {400, R"({"error":{"message":"assistant prefill is not supported"}})"};
    }
    for (const auto& f : fixtures_) {
      if (!f.model.empty() && f.model != model) continue;
      if (haystack.find(f.contains) == std::string::npos) continue;
      if (!hit || f.contains.size() > hit->contains.size()) hit = f;
    }
  }
  if (!hit) return {404, R"({"error":{"message":"no fixture matches this request"}})"};
  if (hit->status != 200) {
    return {hit->status, json{{"error", {{"message", "fixture status"}}}}.dump()};
  }

  json reply = {{"object", "chat.completion"},
                {"model", model},
                {"choices",
                 json::array({{{"index", 0},
                               {"message", {{"role", "assistant"}, {"content", hit->response}}},
                               {"finish_reason", hit->finish_reason}}})}};
  if (hit->completion_tokens) {
    reply["usage"] = {{"prompt_tokens", 0}, {"completion_tokens", *hit->completion_tokens}};
  }
  return {200, reply.dump()};
}

// ---------------------------------------------------------------------------
// ResponseCache
// ---------------------------------------------------------------------------

namespace {

json result_to_json(const GenerationResult& r) {
  json j = {{"text", r.text},
            {"latency_seconds", r.latency_seconds},
            {"reached_max_length", r.reached_max_length},
            {"emulated_prefix", r.emulated_prefix},
            {"finish_reason", r.finish_reason}};
  j["prompt_tokens"] = r.prompt_tokens ? json(*r.prompt_tokens) : json(nullptr);
  j["completion_tokens"] = r.completion_tokens ? json(*r.completion_tokens) : json(nullptr);
  return j;
}

GenerationResult result_from_json(const json& j) {
  GenerationResult r;
  r.text = j.at("text").get<std::string>();
  r.latency_seconds = j.value("latency_seconds", 0.0);
  r.reached_max_length = j.value("reached_max_length", false);
  r.emulated_prefix = j.value("emulated_prefix", false);
  r.finish_reason = j.value("finish_reason", "");
  if (j.contains("prompt_tokens") && !j["prompt_tokens"].is_null()) {
    r.prompt_tokens = j["prompt_tokens"].get<int>();
  }
  if (j.contains("completion_tokens") && !j["completion_tokens"].is_null()) {
    r.completion_tokens = j["completion_tokens"].get<int>();
  }
  return r;
}

}  // namespace

std::filesystem::path ResponseCache::path_for(const std::string& digest) const {
  return dir_ / digest.substr(0, 2) / (digest + ".json");
}

std::optional<GenerationResult> ResponseCache::get(const std::string& digest) {
  {
    std::lock_guard lock(mu_);
    if (auto it = memory_.find(digest); it != memory_.end()) return it->second;
  }
  if (dir_.empty()) return std::nullopt;
  const auto path = path_for(digest);
  if (!std::filesystem::exists(path)) return std::nullopt;
  auto r = result_from_json(json::parse(read_file(path)).at("result"));
  std::lock_guard lock(mu_);
  memory_.emplace(digest, r);
  return r;
}

void ResponseCache::put(const std::string& digest, const json& key, const GenerationResult& r) {
  {
    std::lock_guard lock(mu_);
    if (memory_.count(digest) != 0) return;
    memory_.emplace(digest, r);
  }
  if (dir_.empty()) return;
  const auto path = path_for(digest);
  if (std::filesystem::exists(path)) return;
  const json entry = {{"key", key}, {"result", result_to_json(r)}};
  write_file_atomic(path, entry.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// ModelGateway
// ---------------------------------------------------------------------------

namespace {

void default_sleep(double seconds) {
  std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

std::string replace_token(std::string s, std::string_view token, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = s.find(token, pos)) != std::string::npos) {
    s.replace(pos, token.size(), value);
    pos += value.size();
  }
  return s;
}

}  // namespace

ModelGateway::ModelGateway(GatewayConfig config, std::shared_ptr<Transport> transport,
                           Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper(default_sleep)),
      cache_(config_.cache_dir) {
  if (!transport_) throw Error("gateway requires a transport");
}

const EndpointConfig& ModelGateway::endpoint(ModelRole role) const {
  const auto it = config_.endpoints.find(role);
  if (it == config_.endpoints.end() || it->second.url.empty()) {
    throw GatewayError("no endpoint configured for role " + std::string(to_string(role)), false,
                       0, {});
  }
  return it->second;
}

json ModelGateway::cache_key(const GenerationRequest& request) const {
  const auto& ep = endpoint(request.model_role);
  json key = {{"endpoint", ep.url},
              {"model", ep.model},
              {"system_prompt", request.system_prompt},
              {"user_prompt", request.user_prompt},
              {"max_new_tokens", request.max_new_tokens},
              {"decoding", "greedy"}};
  key["assistant_prefix"] = request.assistant_prefix ? json(*request.assistant_prefix) : json();
  if (request.assistant_prefix) key["prefill_mode"] = to_string(config_.prefill_mode);
  return key;
}

GenerationResult ModelGateway::generate(const GenerationRequest& request) {
  if (request.max_new_tokens <= 0) throw std::invalid_argument("max_new_tokens must be > 0");
  if (request.assistant_prefix) {
    return generate_with_prefix(request, *request.assistant_prefix);
  }
  return run(request, false);
}

GenerationResult ModelGateway::generate_with_prefix(GenerationRequest request,
                                                    const std::string& prefix) {
  if (prefix.empty()) throw std::invalid_argument("forced prefix must be non-empty");
  if (request.max_new_tokens <= 0) throw std::invalid_argument("max_new_tokens must be > 0");
  request.assistant_prefix = prefix;
  return run(request, config_.prefill_mode == PrefillMode::emulate);
}

HttpReply ModelGateway::post_with_retries(const EndpointConfig& ep, const std::string& body,
                                          bool has_prefill) {
  HttpHeaders headers = {{"Content-Type", "application/json"}};
  if (const char* key = std::getenv(ep.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }

  std::vector<std::string> log;
  const int attempts = std::max(1, config_.retry.max_attempts);
  int last_status = 0;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    bool retryable = false;
    try {
      ++network_calls_;
      auto reply = transport_->post(ep.url, body, headers, config_.timeout_seconds);
      last_status = reply.status;
      if (reply.status >= 200 && reply.status < 300) return reply;
      log.push_back("attempt " + std::to_string(attempt) + ": HTTP " +
                    std::to_string(reply.status) + " " + reply.body.substr(0, 200));
      if (reply.status >= 500) {
        retryable = true;
      } else if (has_prefill && (reply.status == 400 || reply.status == 422)) {
        throw PrefillRejectedError(
            "provider rejected the assistant prefill (HTTP " + std::to_string(reply.status) +
                "); set gateway.prefill_mode to \"emulate\" to fall back to prompt-template "
                "emulation",
            false, reply.status, log);
      } else {
        throw GatewayError("HTTP " + std::to_string(reply.status) + " from " + ep.url, false,
                           reply.status, log);
      }
    } catch (const TransportError& e) {
      log.push_back("attempt " + std::to_string(attempt) + ": " + e.what());
      last_status = 0;
      retryable = true;
    }
    if (retryable && attempt < attempts) {
      const auto& b = config_.retry.backoff_seconds;
      const double wait = b.empty() ? 0.0 : b[std::min<std::size_t>(attempt - 1, b.size() - 1)];
      if (wait > 0) sleeper_(wait);
    }
  }
  std::string msg = "request to " + ep.url + " failed after " + std::to_string(attempts) +
                    " attempts";
  for (const auto& l : log) msg += "\n  " + l;
  throw GatewayError(msg, true, last_status, log);
}

GenerationResult ModelGateway::run(const GenerationRequest& request, bool emulate) {
  const auto& ep = endpoint(request.model_role);
  const json key = cache_key(request);
  const std::string digest = sha256_hex(key.dump());
  if (auto cached = cache_.get(digest)) {
    cached->cache_hit = true;
    return *cached;
  }

  json messages = json::array();
  if (!request.system_prompt.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
  }
  const auto& prefix = request.assistant_prefix;
  if (prefix && emulate) {
    messages.push_back(
        {{"role", "user"},
         {"content", request.user_prompt + "\n\n" +
                         replace_token(config_.emulation_instruction, "{prefix}", *prefix)}});
  } else {
    messages.push_back({{"role", "user"}, {"content", request.user_prompt}});
    if (prefix) messages.push_back({{"role", "assistant"}, {"content", *prefix}});
  }
  json body = {{"model", ep.model},
               {"messages", messages},
               {"max_tokens", request.max_new_tokens},
               {"temperature", 0},
               {"stream", false}};
  if (prefix && !emulate) body.update(config_.prefill_fields);

  const auto start = std::chrono::steady_clock::now();
  const auto reply = post_with_retries(ep, body.dump(), prefix && !emulate);
  const double latency =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json parsed;
  try {
    parsed = json::parse(reply.body);
  } catch (const json::parse_error& e) {
    throw GatewayError(std::string("unparseable provider reply: ") + e.what(), false,
                       reply.status, {});
  }
  if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
      parsed["choices"].empty()) {
    throw GatewayError("provider reply has no choices", false, reply.status, {});
  }
  const auto& choice = parsed["choices"][0];
  const auto& message = choice.value("message", json::object());

  GenerationResult r;
  std::string content = message.contains("content") && message["content"].is_string()
                            ? message["content"].get<std::string>()
                            : std::string();
  if (message.contains("reasoning_content") && message["reasoning_content"].is_string() &&
      !message["reasoning_content"].get<std::string>().empty()) {
    content = std::string(kThinkOpen) + message["reasoning_content"].get<std::string>() +
              std::string(kThinkClose) + content;
  }
  if (prefix && content.rfind(*prefix, 0) == 0) content.erase(0, prefix->size());
  r.text = std::move(content);
  r.finish_reason = choice.contains("finish_reason") && choice["finish_reason"].is_string()
                        ? choice["finish_reason"].get<std::string>()
                        : std::string();
  if (parsed.contains("usage") && parsed["usage"].is_object()) {
    const auto& u = parsed["usage"];
    if (u.contains("prompt_tokens") && u["prompt_tokens"].is_number_integer()) {
      r.prompt_tokens = u["prompt_tokens"].get<int>();
    }
    if (u.contains("completion_tokens") && u["completion_tokens"].is_number_integer()) {
      r.completion_tokens = u["completion_tokens"].get<int>();
    }
  }
  r.latency_seconds = latency;
  r.reached_max_length = r.finish_reason == "length" ||
                         (r.completion_tokens && *r.completion_tokens == request.max_new_tokens);
  r.emulated_prefix = prefix.has_value() && emulate;
  r.cache_hit = false;

  cache_.put(digest, key, r);
  return r;
}

std::vector<BatchItem> ModelGateway::collect_batch(const std::vector<GenerationRequest>& requests,
                                                   int parallelism) {
  if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
  std::vector<BatchItem> out(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < requests.size(); i = next++) {
      try {
        out[i].result = generate(requests[i]);
      } catch (const std::exception& e) {
        out[i].error = e.what();
      }
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(parallelism),
                                               requests.size());
  if (n_threads <= 1) {
    worker();
    return out;
  }
  std::vector<std::jthread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  pool.clear();  // joins
  return out;
}

}  // namespace cogtune
