#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "cogtune/corpus.hpp"
#include "cogtune/dataset.hpp"
#include "cogtune/gateway.hpp"
#include "cogtune/util.hpp"

namespace cogtune::fixtures {

/// Problems plus the mock replies of both models for each of them.
struct SyntheticCorpus {
  ProblemSet problems;
  std::vector<MockFixture> fixtures;
};

struct CorpusSpec {
  int easy = 30;   // gsm8k, train split
  int hard = 30;   // math lv.3 / lv.5, train split
  int excluded = 0;  // math lv.1-2, excluded by the train policy
  std::uint64_t seed = 7;
  /// Problems whose short-CoT and long-CoT replies carry a wrong answer.
  std::set<std::string> poisoned;
};

SyntheticCorpus make_corpus(const CorpusSpec& spec);

/// Long-CoT style response with a redundant double-check chunk and a
/// reflective chunk in the middle half.
std::string long_response(long a, long b, long c, int extra_chunks);
std::string short_response(long a, long b);

/// Writes problems.jsonl and fixtures.jsonl into `dir`.
void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

/// Hard stage-1 style samples (difficulty hypnosis already injected).
std::vector<SftSample> synthetic_hard_samples(int n, std::uint64_t seed);

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

class RandomTraceGen {
 public:
  explicit RandomTraceGen(std::uint64_t seed) : rng_(seed) {}

  /// A structured trace (optional hypnosis, think segment, chunks with
  /// irregular separators, conclusion), or occasionally raw tag soup.
  std::string next();

 private:
  std::string pick(const std::vector<std::string>& options);
  std::string chunk_text();
  std::string soup();

  SeededRng rng_;
};

}  // namespace cogtune::fixtures
