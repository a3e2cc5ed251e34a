#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cogtune/corpus.hpp"
#include "cogtune/gateway.hpp"
#include "cogtune/prompts.hpp"
#include "cogtune/trace.hpp"

namespace cogtune {

enum class PromptMode { standard, d_prompt, nothinking, forced_prefix_matched, forced_prefix_unmatched };

/// "default", "d_prompt", "nothinking", "forced_prefix_matched", "forced_prefix_unmatched"
std::string_view to_string(PromptMode m);
PromptMode parse_prompt_mode(std::string_view s);

/// Counts tokens of a completion when the provider reports none.
class TokenCounter {
 public:
  virtual ~TokenCounter() = default;
  virtual std::string name() const = 0;
  virtual long count(std::string_view text) const = 0;
};

/// Words and individual punctuation marks; whitespace separates.
class ApproxTokenCounter final : public TokenCounter {
 public:
  std::string name() const override { return "approx_whitespace_punct"; }
  long count(std::string_view text) const override;
};

inline constexpr std::string_view kProviderCounter = "provider";

struct EvalOptions {
  std::string run_id = "run";
  PromptMode mode = PromptMode::standard;
  ModelRole model_role = ModelRole::long_cot;
  /// Overrides the per-source limit when set.
  std::optional<int> max_new_tokens;
  int default_max_new_tokens = 8192;
  int aime_max_new_tokens = 16384;
  PromptTemplates templates;
  HypnosisStrings hypnosis;
  ChunkerConfig chunker;
  int parallelism = 4;
  long histogram_bucket = 512;
  std::shared_ptr<const TokenCounter> tokenizer = std::make_shared<ApproxTokenCounter>();
};

/// Generation limit for a problem: override, else 16384 for AIME, else 8192.
int max_new_tokens_for(const Problem& p, const EvalOptions& options);

/// Forced assistant prefix for a mode, if any. Matched modes pick the
/// hypnosis string agreeing with the gold label; unmatched the other one.
std::optional<std::string> forced_prefix(PromptMode mode, Difficulty gold,
                                         const EvalOptions& options);

GenerationRequest build_eval_request(const Problem& p, const EvalOptions& options);

struct EvalRecord {
  std::string problem_id;
  Source source = Source::custom;
  /// Label used for forced prefixes (lv.3 counts as Hard here).
  Difficulty gold = Difficulty::Hard;
  /// Label used for cognition scoring (lv.3 stays Excluded).
  Difficulty cognition_gold = Difficulty::Excluded;
  std::string response;  // forced prefix + continuation
  Trace trace;
  bool correct = false;
  bool needs_review = false;
  std::optional<int> provider_tokens;
  long tokens = 0;
  std::string token_counter;
  bool looped = false;
  std::string error;  // non-empty: generation failed, excluded from metrics

  bool failed() const { return !error.empty(); }
};

struct PartitionStat {
  std::optional<double> overall;
  std::optional<double> correct;
  std::optional<double> incorrect;

  bool operator==(const PartitionStat&) const = default;
};

struct HistogramBucket {
  long lower = 0;  // inclusive
  long upper = 0;  // exclusive
  std::size_t correct = 0;
  std::size_t incorrect = 0;

  bool operator==(const HistogramBucket&) const = default;
};

struct EvalReport {
  std::string run_id;
  PromptMode prompt_mode = PromptMode::standard;
  std::string problem_set_sha256;
  std::size_t n_problems = 0;
  std::size_t n_scored = 0;
  std::size_t n_correct = 0;
  std::size_t n_needs_review = 0;
  std::vector<std::string> failed_ids;
  double accuracy = 0.0;
  double mean_tokens = 0.0;
  double mean_latency_seconds = 0.0;
  std::string token_counter;
  std::optional<double> cognition_rate;
  PartitionStat reflection_stats;
  PartitionStat loop_ratio;
  std::vector<HistogramBucket> length_histogram;

  bool operator==(const EvalReport&) const = default;
};

nlohmann::json to_json(const PartitionStat& s);
PartitionStat partition_stat_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);

/// Share of gold-labelled (Easy/Hard) traces whose hypnosis maps onto the
/// gold label. A missing or unclassifiable hypnosis is a miss; traces with
/// any other gold label are ignored. nullopt when nothing is labelled.
std::optional<double> difficulty_cognition_rate(const std::vector<Trace>& traces,
                                                const std::vector<Difficulty>& gold,
                                                const HypnosisVocabulary& vocabulary = {});

/// Mean reflective-chunk count over all, correct and incorrect traces.
PartitionStat reflection_stats(const std::vector<Trace>& traces, const std::vector<bool>& correct);

/// Share of traces ending in a terminal loop over the same partitions.
PartitionStat loop_stats(const std::vector<Trace>& traces, const std::vector<bool>& correct,
                         int window = 10, int min_repeats = 3);

std::vector<HistogramBucket> length_histogram(const std::vector<long>& tokens,
                                              const std::vector<bool>& correct, long bucket);

/// Aggregates graded records into a report; failed records are excluded.
EvalReport summarize(const std::vector<EvalRecord>& records, const EvalOptions& options);

struct EvalRun {
  std::vector<EvalRecord> records;
  EvalReport report;
};

/// One greedy generation per problem under the chosen prompt mode.
EvalRun evaluate_run(const ProblemSet& problems, ModelGateway& gateway, const EvalOptions& options);

/// Digest of the problem ids, questions and answers.
std::string problem_set_digest(const ProblemSet& problems);

nlohmann::json to_json(const EvalRecord& r);
void write_traces(const std::vector<EvalRecord>& records, const std::filesystem::path& path);

}  // namespace cogtune
