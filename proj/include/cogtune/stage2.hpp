#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cogtune/dataset.hpp"
#include "cogtune/gateway.hpp"
#include "cogtune/prompts.hpp"
#include "cogtune/trace.hpp"

namespace cogtune {

enum class Verdict { contributes, redundant, loop_candidate };

std::string_view to_string(Verdict v);

struct DeterminatorVerdict {
  int chunk_index = 0;
  Verdict verdict = Verdict::contributes;
  DeterminatorMode mode = DeterminatorMode::rule_based;
  std::string rationale;
};

/// What the LLM judge needs besides the trace.
struct JudgeContext {
  std::string question;
  ModelGateway* gateway = nullptr;  // required for llm_judge
  PromptTemplates templates;
  ChunkerConfig chunker;
  int max_new_tokens = 4096;
  int retries = 2;  // extra attempts after an unparseable reply
  int parallelism = 4;
};

/// Constrained verdict token in a judge reply (the last CONTRIBUTES /
/// REDUNDANT / LOOP after any think segment), or nullopt.
std::optional<Verdict> parse_judge_reply(std::string_view reply);

/// Numbers (canonical rationals) and compact equations a chunk states.
struct ChunkFacts {
  std::vector<std::string> numbers;
  std::vector<std::string> equations;
};

ChunkFacts extract_chunk_facts(std::string_view text);

/// Rule: a reflective chunk that states no number or equation absent from
/// the chunks before it is redundant.
DeterminatorVerdict judge_chunk_rule_based(const Trace& trace, int chunk_index);

/// Judges one chunk. The LLM judge sees the question and chunks up to and
/// including the candidate only; an unparseable reply after the retries
/// yields `contributes`.
DeterminatorVerdict judge_chunk(const Trace& trace, int chunk_index, DeterminatorMode mode,
                                const JudgeContext& ctx);

/// Several chunks of one trace; LLM requests go out as one bounded batch.
std::vector<DeterminatorVerdict> judge_chunks(const Trace& trace, const std::vector<int>& indices,
                                              DeterminatorMode mode, const JudgeContext& ctx);

/// Raised when a transformation cannot be applied to a sample.
class IneligibleSample : public Error {
 public:
  using Error::Error;
};

struct TransformOptions {
  HypnosisStrings hypnosis;
  PromptTemplates templates;
  ChunkerConfig chunker;
};

/// Keeps chunks 0..m-1, appends the redundancy hypnosis and replaces the
/// conclusion with the reference answer statement. Throws for m < 1 and
/// IneligibleSample when the thoughts would not get strictly shorter.
SftSample apply_redundancy_truncation(const SftSample& sample, int m,
                                      const TransformOptions& options = TransformOptions{});

struct LoopOutcome {
  SftSample sample;
  bool eligible = false;
};

/// Reflective chunks in the middle half of the trace, excluding ones that
/// already repeat their predecessor.
std::vector<int> loop_candidates(const Trace& trace);

/// Picks a seeded reflective chunk m from the middle half, emits chunks
/// 0..m, `repeats - 1` more copies of chunk m, the loop-break hypnosis and the
/// reference answer conclusion. Ineligible samples come back unchanged.
LoopOutcome simulate_loop(const SftSample& sample, std::uint64_t rng_seed, int repeats,
                          const TransformOptions& options = TransformOptions{});

struct Stage2Options {
  std::uint64_t seed = 42;
  DeterminatorMode judge_mode = DeterminatorMode::rule_based;
  int repeats = 3;
  double redundancy_fraction = 0.25;  // of the Hard half
  double loop_fraction = 0.25;
  TransformOptions transform;
  JudgeContext judge;  // question is filled per sample
};

struct Stage2Result {
  Dataset dataset;
  std::vector<std::string> warnings;
};

/// Easy samples pass through. The Hard half is split by a seeded shuffle into
/// untouched / redundancy-truncated / loop-simulated buckets; ineligible
/// bucket members are swapped for untouched samples while any remain.
Stage2Result compose_stage2(const Dataset& stage1, const Stage2Options& options);

}  // namespace cogtune
