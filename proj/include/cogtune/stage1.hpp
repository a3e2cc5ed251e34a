#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "cogtune/corpus.hpp"
#include "cogtune/dataset.hpp"
#include "cogtune/gateway.hpp"
#include "cogtune/prompts.hpp"
#include "cogtune/trace.hpp"

namespace cogtune {

/// Responses of one model over one problem set; correct_ids is decided by
/// the answer judge alone.
struct ResponsePool {
  ModelRole model_role = ModelRole::long_cot;
  std::map<std::string, Trace> entries;
  std::set<std::string> correct_ids;
  /// Generation failures, excluded from correct_ids.
  std::map<std::string, std::string> failures;
};

struct PoolSet {
  ResponsePool short_easy;  // short-CoT model on easy problems
  ResponsePool long_easy;   // long-CoT model on easy problems
  ResponsePool long_hard;   // long-CoT model on hard problems
};

struct CollectOptions {
  PromptTemplates templates;
  ChunkerConfig chunker;
  int parallelism = 4;
  int max_new_tokens = 8192;
};

/// Train-split problems bucketed with the train policy; Excluded ones dropped.
std::pair<ProblemSet, ProblemSet> split_training_problems(const ProblemSet& problems);

/// Queries the short model on `easy` and the long model on `easy` and `hard`,
/// grading every response against its reference.
PoolSet build_pools(const ProblemSet& easy, const ProblemSet& hard, ModelGateway& gateway,
                    const CollectOptions& options);

/// |short ∩ long| / |long| over correct ids. Throws when `long_pool` has no
/// correct responses.
double overlap_ratio(const ResponsePool& short_pool, const ResponsePool& long_pool);

/// JSONL: {"problem_id","role","response","correct","reached_max_length",
/// "latency_seconds","error"}.
void write_pool(const ResponsePool& pool, const std::filesystem::path& path);

/// Correctness is re-derived from the responses and the problems' references.
ResponsePool read_pool(const std::filesystem::path& path, const ProblemSet& problems,
                       const ChunkerConfig& chunker = ChunkerConfig{});

/// Canonical digest of a pool's responses and membership.
std::string pool_digest(const ResponsePool& pool);

/// Prefixes the difficulty hypnosis matching the sample's label. Throws if the
/// response already carries one.
SftSample inject_difficulty_hypnosis(SftSample sample,
                                     const HypnosisStrings& strings = HypnosisStrings{});

struct Stage1Options {
  /// 0 selects the largest balanced size the pools allow.
  int target_size = 0;
  std::uint64_t seed = 42;
  HypnosisStrings hypnosis;
  PromptTemplates templates;
  ChunkerConfig chunker;
};

struct Stage1Result {
  Dataset draft;    // every correct response, before balancing
  Dataset dataset;  // balanced 1:1 selection
};

/// Easy samples from the short-CoT pool (wrapped as a short think segment plus
/// an answer conclusion), Hard samples from the long-CoT pool, all
/// hypnosis-injected and re-graded.
Dataset build_draft_dataset(const ResponsePool& short_easy, const ResponsePool& long_hard,
                            const ProblemSet& problems, const Stage1Options& options);

/// Seeded 1:1 selection of floor(target/2) Easy and Hard samples. Throws with
/// the largest achievable balanced size when a pool is too small.
Stage1Result build_stage1_dataset(const ResponsePool& short_easy, const ResponsePool& long_hard,
                                  const ProblemSet& problems, const Stage1Options& options);

}  // namespace cogtune
