#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cogtune {

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kHypnosisOpen = "<hypnosis>";
inline constexpr std::string_view kHypnosisClose = "</hypnosis>";
inline constexpr std::string_view kChunkDelimiter = "\n\n";

// Hypnosis bodies, ASCII apostrophes.
inline constexpr std::string_view kEasyHypnosis = "This is a simple question, let's think quickly.";
inline constexpr std::string_view kHardHypnosis = "It seems difficult, let's think thoroughly.";
inline constexpr std::string_view kRedundancyHypnosis = "Everything seems ok, let's move on.";
inline constexpr std::string_view kLoopHypnosis = "Oh, I'm stuck in a loop. Time to break out.";

enum class HypnosisCategory { difficulty_easy, difficulty_hard, redundancy, loop_break, unknown };
enum class HypnosisPlacement { before_think, after_think_open };
enum class ChunkKind { plain, reflective };

std::string_view to_string(HypnosisCategory c);
HypnosisCategory parse_hypnosis_category(std::string_view s);

/// Word lists used to map free-form hypnosis bodies onto Easy/Hard.
struct HypnosisVocabulary {
  std::vector<std::string> easy = {"simple", "easy", "quickly", "quick", "straightforward",
                                   "basic", "trivial"};
  std::vector<std::string> hard = {"difficult", "tough", "thoroughly", "challenging",
                                   "hard", "complex", "complicated", "tricky"};
};

struct HypnosisTag {
  std::string body;
  HypnosisCategory category = HypnosisCategory::unknown;

  /// "<hypnosis>" + body + "</hypnosis>"
  std::string serialize() const;

  bool operator==(const HypnosisTag&) const = default;
};

/// Builds a tag from a body, straightening quotes and trimming padding.
HypnosisTag make_hypnosis(std::string_view body,
                          const HypnosisVocabulary& vocab = HypnosisVocabulary{});

HypnosisCategory classify_hypnosis(std::string_view body,
                                   const HypnosisVocabulary& vocab = HypnosisVocabulary{});

/// Parses text that is exactly one hypnosis tag (surrounding whitespace allowed).
std::optional<HypnosisTag> parse_hypnosis_tag(std::string_view text,
                                              const HypnosisVocabulary& vocab = HypnosisVocabulary{});

struct Chunk {
  int index = 0;
  std::string text;
  ChunkKind kind = ChunkKind::plain;
  std::optional<std::string> matched_keyword;
  /// Delimiters between the previous chunk (or the start) and this one.
  int separators_before = 0;

  bool operator==(const Chunk&) const = default;
};

const std::vector<std::string>& default_reflection_keywords();

struct ChunkerConfig {
  std::vector<std::string> keywords = default_reflection_keywords();
  int loop_window = 10;
  int loop_min_repeats = 3;
  HypnosisVocabulary vocabulary;
};

struct Chunking {
  std::vector<Chunk> chunks;
  int trailing_separators = 0;

  /// Byte-exact inverse of chunk_thoughts.
  std::string join() const;
};

/// Splits on "\n\n"; empty segments are dropped and recorded as extra
/// separators so that join() reproduces the input.
Chunking chunk_thoughts(std::string_view thoughts);

/// Reflective iff a keyword occurs as a whole word; the first matching keyword
/// in list order is recorded.
Chunk classify_reflective(Chunk chunk, const std::vector<std::string>& keywords);

/// One model response split into optional hypnosis, thoughts and conclusion.
/// The layout fields let serialize_trace() reproduce `raw` byte for byte.
struct Trace {
  std::string problem_id;
  std::string raw;
  std::optional<HypnosisTag> hypnosis;
  std::string thoughts;
  std::string conclusion;
  std::vector<Chunk> chunks;
  bool reached_max_length = false;
  double latency_seconds = 0.0;
  bool malformed = false;

  // layout
  HypnosisPlacement placement = HypnosisPlacement::before_think;
  std::string lead;             // text before <think> that is not a hypnosis
  std::string hypnosis_lead;    // whitespace before the tag
  std::string hypnosis_source;  // tag bytes as they appeared
  std::string gap;              // text between the tag and <think>
  bool has_think_open = false;
  bool has_think_close = false;
  int trailing_separators = 0;
};

Trace parse_trace(std::string_view raw, const ChunkerConfig& config = ChunkerConfig{});

std::string serialize_trace(const Trace& trace);

/// Canonical form: [hypnosis]<think>thoughts</think>conclusion.
std::string compose_response(const std::optional<HypnosisTag>& hypnosis,
                             std::string_view thoughts, std::string_view conclusion);

/// Whitespace collapsed, trailing punctuation stripped.
std::string chunk_normal_form(std::string_view text);

/// True iff the trace hit the length limit and, within its last `window`
/// chunks, one normalized chunk repeats at least `min_repeats` times in a row.
bool detect_terminal_loop(const Trace& trace, int window, int min_repeats);

/// The trace cut just before its first loop-break hypnosis chunk, marked as
/// having reached the length limit; nullopt if there is no such chunk.
std::optional<Trace> simulated_loop_region(const Trace& trace,
                                           const ChunkerConfig& config = ChunkerConfig{});

}  // namespace cogtune
