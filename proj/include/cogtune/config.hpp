#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "cogtune/gateway.hpp"
#include "cogtune/prompts.hpp"
#include "cogtune/stage2.hpp"
#include "cogtune/trace.hpp"

namespace cogtune {

/// Everything the command-line tool reads from its JSON config file.
struct AppConfig {
  GatewayConfig gateway;
  PromptTemplates templates;
  HypnosisStrings hypnosis;
  ChunkerConfig chunker;  // keywords, loop thresholds, cognition vocabulary

  std::uint64_t seed = 42;
  int parallelism = 4;
  int generation_max_new_tokens = 8192;

  int stage1_target_size = 0;  // 0: largest balanced size

  double stage2_untouched = 0.50;
  double stage2_redundancy = 0.25;
  double stage2_loop = 0.25;
  int stage2_repeats = 3;
  DeterminatorMode determinator = DeterminatorMode::rule_based;
  int judge_max_new_tokens = 4096;
  int judge_retries = 2;

  int eval_max_new_tokens = 8192;
  int eval_aime_max_new_tokens = 16384;
  long histogram_bucket = 512;
};

/// Defaults with placeholder local endpoints (model names "short-cot",
/// "long-cot", "judge"), which the mock transport matches on.
AppConfig default_config();

/// Overlays a JSON document on the defaults. Unknown keys are rejected so
/// that typos fail loudly.
AppConfig config_from_json(const nlohmann::json& j);
AppConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const AppConfig& c);

}  // namespace cogtune
