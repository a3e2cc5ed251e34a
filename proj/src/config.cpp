#include "cogtune/config.hpp"

#include <cmath>
#include <set>

#include "cogtune/util.hpp"

namespace cogtune {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw Error("config: '" + where + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (allowed.count(k) == 0) throw Error("config: unknown key '" + where + "." + k + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j[key].get<T>();
}

const std::pair<const char*, std::string PromptTemplates::*> kTemplateFields[] = {
    {"system_prompt", &PromptTemplates::system_prompt},
    {"user", &PromptTemplates::user},
    {"d_prompt", &PromptTemplates::d_prompt},
    {"nothinking_prefix", &PromptTemplates::nothinking_prefix},
    {"conclusion", &PromptTemplates::conclusion},
    {"judge_redundancy", &PromptTemplates::judge_redundancy},
    {"judge_retry_suffix", &PromptTemplates::judge_retry_suffix}};

const std::pair<const char*, std::string HypnosisStrings::*> kHypnosisFields[] = {
    {"easy", &HypnosisStrings::easy},
    {"hard", &HypnosisStrings::hard},
    {"redundancy", &HypnosisStrings::redundancy},
    {"loop", &HypnosisStrings::loop}};

}  // namespace

AppConfig default_config() {
  AppConfig c;
  const std::string url = "http://127.0.0.1:8000/v1/chat/completions";
  c.gateway.endpoints[ModelRole::short_cot] = {url, "short-cot", "TH2T_API_KEY"};
  c.gateway.endpoints[ModelRole::long_cot] = {url, "long-cot", "TH2T_API_KEY"};
  c.gateway.endpoints[ModelRole::judge] = {url, "judge", "TH2T_API_KEY"};
  return c;
}

AppConfig config_from_json(const json& j) {
  AppConfig c = default_config();
  check_keys(j, "", {"endpoints", "gateway", "templates", "hypnosis", "reflection_keywords",
                     "cognition_vocabulary", "loop", "seed", "parallelism", "generation", "stage1",
                     "stage2", "evaluation"});

  if (j.contains("endpoints")) {
    check_keys(j["endpoints"], "endpoints", {"short_cot", "long_cot", "judge"});
    for (const auto& [role, e] : j["endpoints"].items()) {
      check_keys(e, "endpoints." + role, {"url", "model", "api_key_env"});
      auto& ep = c.gateway.endpoints[parse_model_role(role)];
      read(e, "url", ep.url);
      read(e, "model", ep.model);
      read(e, "api_key_env", ep.api_key_env);
    }
  }
  if (j.contains("gateway")) {
    const auto& g = j["gateway"];
    check_keys(g, "gateway", {"prefill_mode", "prefill_fields", "emulation_instruction",
                              "timeout_seconds", "max_attempts", "backoff_seconds", "cache_dir"});
    if (g.contains("prefill_mode")) {
      c.gateway.prefill_mode = parse_prefill_mode(g["prefill_mode"].get<std::string>());
    }
    read(g, "prefill_fields", c.gateway.prefill_fields);
    read(g, "emulation_instruction", c.gateway.emulation_instruction);
    read(g, "timeout_seconds", c.gateway.timeout_seconds);
    read(g, "max_attempts", c.gateway.retry.max_attempts);
    read(g, "backoff_seconds", c.gateway.retry.backoff_seconds);
    if (g.contains("cache_dir")) c.gateway.cache_dir = g["cache_dir"].get<std::string>();
  }
  if (j.contains("templates")) {
    std::set<std::string> keys;
    for (const auto& [k, m] : kTemplateFields) keys.insert(k);
    check_keys(j["templates"], "templates", keys);
    for (const auto& [k, m] : kTemplateFields) read(j["templates"], k, c.templates.*m);
  }
  if (j.contains("hypnosis")) {
    check_keys(j["hypnosis"], "hypnosis", {"easy", "hard", "redundancy", "loop"});
    for (const auto& [k, m] : kHypnosisFields) read(j["hypnosis"], k, c.hypnosis.*m);
  }
  read(j, "reflection_keywords", c.chunker.keywords);
  if (c.chunker.keywords.empty()) throw Error("config: reflection_keywords must not be empty");
  if (j.contains("cognition_vocabulary")) {
    check_keys(j["cognition_vocabulary"], "cognition_vocabulary", {"easy", "hard"});
    read(j["cognition_vocabulary"], "easy", c.chunker.vocabulary.easy);
    read(j["cognition_vocabulary"], "hard", c.chunker.vocabulary.hard);
  }
  if (j.contains("loop")) {
    check_keys(j["loop"], "loop", {"window", "min_repeats"});
    read(j["loop"], "window", c.chunker.loop_window);
    read(j["loop"], "min_repeats", c.chunker.loop_min_repeats);
  }
  read(j, "seed", c.seed);
  read(j, "parallelism", c.parallelism);
  if (j.contains("generation")) {
    check_keys(j["generation"], "generation", {"max_new_tokens"});
    read(j["generation"], "max_new_tokens", c.generation_max_new_tokens);
  }
  if (j.contains("stage1")) {
    check_keys(j["stage1"], "stage1", {"target_size"});
    read(j["stage1"], "target_size", c.stage1_target_size);
  }
  if (j.contains("stage2")) {
    const auto& s = j["stage2"];
    check_keys(s, "stage2", {"untouched", "redundancy", "loop", "repeats", "determinator",
                             "judge_max_new_tokens", "judge_retries"});
    read(s, "untouched", c.stage2_untouched);
    read(s, "redundancy", c.stage2_redundancy);
    read(s, "loop", c.stage2_loop);
    read(s, "repeats", c.stage2_repeats);
    if (s.contains("determinator")) {
      c.determinator = parse_determinator_mode(s["determinator"].get<std::string>());
    }
    read(s, "judge_max_new_tokens", c.judge_max_new_tokens);
    read(s, "judge_retries", c.judge_retries);
  }
  if (j.contains("evaluation")) {
    const auto& e = j["evaluation"];
    check_keys(e, "evaluation", {"max_new_tokens", "aime_max_new_tokens", "histogram_bucket"});
    read(e, "max_new_tokens", c.eval_max_new_tokens);
    read(e, "aime_max_new_tokens", c.eval_aime_max_new_tokens);
    read(e, "histogram_bucket", c.histogram_bucket);
  }

  const double sum = c.stage2_untouched + c.stage2_redundancy + c.stage2_loop;
  if (std::fabs(sum - 1.0) > 1e-9 || c.stage2_untouched < 0 || c.stage2_redundancy < 0 ||
      c.stage2_loop < 0) {
    throw Error("config: stage2 ratios must be non-negative and sum to 1");
  }
  if (c.parallelism < 1) throw Error("config: parallelism must be >= 1");
  if (c.stage2_repeats < 2) throw Error("config: stage2.repeats must be >= 2");
  if (c.chunker.loop_min_repeats < 2 || c.chunker.loop_window < c.chunker.loop_min_repeats) {
    throw Error("config: loop requires window >= min_repeats >= 2");
  }
  return c;
}

AppConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

json to_json(const AppConfig& c) {
  json j;
  for (const auto& [role, ep] : c.gateway.endpoints) {
    j["endpoints"][std::string(to_string(role))] = {
        {"url", ep.url}, {"model", ep.model}, {"api_key_env", ep.api_key_env}};
  }
  j["gateway"] = {{"prefill_mode", to_string(c.gateway.prefill_mode)},
                  {"prefill_fields", c.gateway.prefill_fields},
                  {"emulation_instruction", c.gateway.emulation_instruction},
                  {"timeout_seconds", c.gateway.timeout_seconds},
                  {"max_attempts", c.gateway.retry.max_attempts},
                  {"backoff_seconds", c.gateway.retry.backoff_seconds},
                  {"cache_dir", c.gateway.cache_dir.string()}};
  for (const auto& [k, m] : kTemplateFields) j["templates"][k] = c.templates.*m;
  for (const auto& [k, m] : kHypnosisFields) j["hypnosis"][k] = c.hypnosis.*m;
  j["reflection_keywords"] = c.chunker.keywords;
  j["cognition_vocabulary"] = {{"easy", c.chunker.vocabulary.easy}, {"hard", c.chunker.vocabulary.hard}};
  j["loop"] = {{"window", c.chunker.loop_window}, {"min_repeats", c.chunker.loop_min_repeats}};
  j["seed"] = c.seed;
  j["parallelism"] = c.parallelism;
  j["generation"] = {{"max_new_tokens", c.generation_max_new_tokens}};
  j["stage1"] = {{"target_size", c.stage1_target_size}};
  j["stage2"] = {{"untouched", c.stage2_untouched},
                 {"redundancy", c.stage2_redundancy},
                 {"loop", c.stage2_loop},
                 {"repeats", c.stage2_repeats},
                 {"determinator", to_string(c.determinator)},
                 {"judge_max_new_tokens", c.judge_max_new_tokens},
                 {"judge_retries", c.judge_retries}};
  j["evaluation"] = {{"max_new_tokens", c.eval_max_new_tokens},
                     {"aime_max_new_tokens", c.eval_aime_max_new_tokens},
                     {"histogram_bucket", c.histogram_bucket}};
  return j;
}

}  // namespace cogtune
