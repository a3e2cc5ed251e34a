#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cogtune/corpus.hpp"
#include "cogtune/gateway.hpp"

namespace cogtune {

enum class Stage2Variant { none, redundancy_truncated, loop_simulated };
enum class DeterminatorMode { llm_judge, rule_based };

std::string_view to_string(Stage2Variant v);
Stage2Variant parse_stage2_variant(std::string_view s);
std::string_view to_string(DeterminatorMode m);
DeterminatorMode parse_determinator_mode(std::string_view s);

/// One (question, refined response) training record.
struct SftSample {
  std::string problem_id;
  std::string question;
  std::string response;  // hypnosis + <think>thoughts</think> + conclusion
  Difficulty difficulty = Difficulty::Easy;
  Stage2Variant stage2_variant = Stage2Variant::none;
  ModelRole provenance = ModelRole::short_cot;
  /// Not serialized; rejoined from the problem set when a dataset is loaded.
  std::string reference_answer;
  // Stage-2 annotations
  std::optional<DeterminatorMode> determinator_mode;
  std::optional<int> m;

  bool operator==(const SftSample&) const = default;
};

struct Dataset {
  std::vector<SftSample> samples;
  nlohmann::json manifest = nlohmann::json::object();
};

/// Chat-format record. Stage-2 fields are written when `with_stage2` is set.
nlohmann::json to_json(const SftSample& s, bool with_stage2);
SftSample sample_from_json(const nlohmann::json& j);

std::string dataset_jsonl(const Dataset& d, bool with_stage2);

/// Writes <dir>/<jsonl_name> and <dir>/manifest.json. The manifest gains a
/// "dataset_sha256" entry for the emitted bytes.
void write_dataset(Dataset& d, const std::filesystem::path& dir, const std::string& jsonl_name,
                   bool with_stage2);

/// Loads a dataset file and rejoins reference answers from `problems`.
Dataset read_dataset(const std::filesystem::path& jsonl, const ProblemSet& problems);

}  // namespace cogtune
