#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "cogtune/trace.hpp"
#include "cogtune/util.hpp"
#include "synthetic.hpp"

using namespace cogtune;

namespace {

Trace with_chunks(const std::vector<std::string>& texts, bool reached_max) {
  std::string thoughts;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (i > 0) thoughts += kChunkDelimiter;
    thoughts += texts[i];
  }
  auto t = parse_trace("<think>" + thoughts + "</think>done");
  t.reached_max_length = reached_max;
  return t;
}

// Oracle: non-empty segments between "\n\n" occurrences, scanning left to right.
std::vector<std::string> naive_segments(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find("\n\n", start);
    const auto seg = s.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    if (!seg.empty()) out.push_back(seg);
    if (pos == std::string::npos) break;
    start = pos + 2;
  }
  return out;
}

}  // namespace

TEST(ParseTrace, DelimiterRule) {
  const auto t = parse_trace("<think>A</think>B");
  EXPECT_EQ(t.thoughts, "A");
  EXPECT_EQ(t.conclusion, "B");
  EXPECT_FALSE(t.hypnosis);
  EXPECT_FALSE(t.malformed);
}

TEST(ParseTrace, EasyHypnosisPrefix) {
  const auto t = parse_trace(
      "<hypnosis>This is a simple question, let's think quickly.</hypnosis><think>A</think>B");
  ASSERT_TRUE(t.hypnosis);
  EXPECT_EQ(t.hypnosis->category, HypnosisCategory::difficulty_easy);
  EXPECT_EQ(t.thoughts, "A");
}

TEST(ParseTrace, HypnosisAfterThinkOpen) {
  const auto raw = "<think><hypnosis>It seems difficult, let's think thoroughly.</hypnosis>\nA</think>B";
  const auto t = parse_trace(raw);
  ASSERT_TRUE(t.hypnosis);
  EXPECT_EQ(t.hypnosis->category, HypnosisCategory::difficulty_hard);
  EXPECT_EQ(t.placement, HypnosisPlacement::after_think_open);
  EXPECT_EQ(serialize_trace(t), raw);
}

TEST(ParseTrace, NoDelimiters) {
  const auto t = parse_trace("no delimiters at all");
  EXPECT_EQ(t.thoughts, "");
  EXPECT_EQ(t.conclusion, "no delimiters at all");
  EXPECT_TRUE(t.chunks.empty());
}

TEST(ParseTrace, UnbalancedIsMalformed) {
  const auto t = parse_trace("<think>A\n\nB");
  EXPECT_TRUE(t.malformed);
  EXPECT_EQ(t.thoughts, "A\n\nB");
  EXPECT_EQ(t.conclusion, "");
  EXPECT_EQ(serialize_trace(t), "<think>A\n\nB");
}

TEST(ParseTrace, FirstOpenLastClose) {
  const auto t = parse_trace("<think>a</think>b</think>c");
  EXPECT_EQ(t.thoughts, "a</think>b");
  EXPECT_EQ(t.conclusion, "c");
}

TEST(ParseTrace, CurlyApostropheStraightenedButBytesKept) {
  const auto raw = "<hypnosis>This is a simple question, let’s think quickly.</hypnosis><think>A</think>B";
  const auto t = parse_trace(raw);
  ASSERT_TRUE(t.hypnosis);
  EXPECT_EQ(t.hypnosis->body, kEasyHypnosis);
  EXPECT_EQ(t.hypnosis->category, HypnosisCategory::difficulty_easy);
  EXPECT_EQ(serialize_trace(t), raw);
}

TEST(ParseTrace, PaddedHardBodyIsTrimmed) {
  const auto t = parse_trace("<hypnosis>  It seems difficult,   let's think thoroughly. </hypnosis><think>x</think>");
  ASSERT_TRUE(t.hypnosis);
  EXPECT_EQ(t.hypnosis->category, HypnosisCategory::difficulty_hard);
}

TEST(Hypnosis, SerializedFormIsExact) {
  EXPECT_EQ(make_hypnosis(kRedundancyHypnosis).serialize(),
            "<hypnosis>Everything seems ok, let's move on.</hypnosis>");
  EXPECT_EQ(make_hypnosis(kLoopHypnosis).category, HypnosisCategory::loop_break);
  EXPECT_EQ(make_hypnosis(kRedundancyHypnosis).category, HypnosisCategory::redundancy);
  EXPECT_EQ(make_hypnosis("Hmm").category, HypnosisCategory::unknown);
  EXPECT_EQ(make_hypnosis("This looks tough.").category, HypnosisCategory::difficulty_hard);
}

TEST(ChunkThoughts, Examples) {
  const auto c = chunk_thoughts("A\n\nB\n\nC");
  ASSERT_EQ(c.chunks.size(), 3u);
  EXPECT_EQ(c.chunks[0].text, "A");
  EXPECT_EQ(c.chunks[2].text, "C");
  EXPECT_EQ(c.chunks[2].index, 2);

  EXPECT_EQ(chunk_thoughts("A").chunks.size(), 1u);

  const auto d = chunk_thoughts("A\n\n\n\nB");
  ASSERT_EQ(d.chunks.size(), 2u);
  EXPECT_EQ(d.chunks[1].separators_before, 2);
  EXPECT_EQ(d.join(), "A\n\n\n\nB");
}

TEST(ChunkThoughts, EmptyInput) {
  const auto c = chunk_thoughts("");
  EXPECT_TRUE(c.chunks.empty());
  EXPECT_EQ(c.join(), "");
}

TEST(Reflective, Examples) {
  const auto& kw = default_reflection_keywords();
  const auto a = classify_reflective(Chunk{0, "Wait, recheck the sum."}, kw);
  EXPECT_EQ(a.kind, ChunkKind::reflective);
  EXPECT_EQ(a.matched_keyword, "Wait");
  EXPECT_EQ(classify_reflective(Chunk{0, "Butter is 3 dollars."}, kw).kind, ChunkKind::plain);
  EXPECT_EQ(classify_reflective(Chunk{0, "So x=2."}, kw).kind, ChunkKind::plain);
}

TEST(Reflective, DefaultKeywordList) {
  const std::vector<std::string> expected = {"Wait", "wait", "Alternatively", "alternatively", "But", "but"};
  EXPECT_EQ(default_reflection_keywords(), expected);
}

TEST(Reflective, FirstMatchInListOrder) {
  const auto c = classify_reflective(Chunk{0, "but wait, Alternatively"}, default_reflection_keywords());
  EXPECT_EQ(c.matched_keyword, "wait");
}

TEST(Reflective, MonotoneInKeywordSet) {
  fixtures::RandomTraceGen gen(11);
  const std::vector<std::string> extra = {"However", "check", "x", "Hmm"};
  for (int i = 0; i < 2000; ++i) {
    const auto chunking = chunk_thoughts(gen.next());
    for (const auto& ch : chunking.chunks) {
      auto kw = default_reflection_keywords();
      const bool before = classify_reflective(ch, kw).kind == ChunkKind::reflective;
      for (const auto& e : extra) {
        kw.push_back(e);
        const auto after = classify_reflective(ch, kw);
        if (before) EXPECT_EQ(after.kind, ChunkKind::reflective) << ch.text;
        EXPECT_EQ(after.kind == ChunkKind::reflective, after.matched_keyword.has_value());
      }
    }
  }
}

TEST(Loop, Examples) {
  EXPECT_TRUE(detect_terminal_loop(with_chunks({"a", "b", "X", "X", "X"}, true), 10, 3));
  EXPECT_FALSE(detect_terminal_loop(with_chunks({"a", "b", "X", "X", "X"}, false), 10, 3));
  EXPECT_FALSE(detect_terminal_loop(with_chunks({"a", "b", "c", "d", "e"}, true), 10, 3));
}

TEST(Loop, NormalizationIgnoresSpacingAndTrailingPunctuation) {
  EXPECT_TRUE(detect_terminal_loop(with_chunks({"a", "X  y.", "X y", "X\ny!"}, true), 10, 3));
}

TEST(Loop, RepeatsMustBeConsecutive) {
  EXPECT_FALSE(detect_terminal_loop(with_chunks({"X", "a", "X", "b", "X"}, true), 10, 3));
}

TEST(Loop, OnlyWithinWindow) {
  std::vector<std::string> texts = {"X", "X", "X"};
  for (int i = 0; i < 10; ++i) texts.push_back("distinct " + std::to_string(i));
  EXPECT_FALSE(detect_terminal_loop(with_chunks(texts, true), 10, 3));
  EXPECT_TRUE(detect_terminal_loop(with_chunks(texts, true), 13, 3));
}

TEST(Loop, SimulatedRegionCutsBeforeLoopTag) {
  const auto raw = "<think>a\n\nWait, X.\n\nWait, X.\n\nWait, X.\n\n" + make_hypnosis(kLoopHypnosis).serialize() +
                   "\n</think>\nThe answer is 1.";
  const auto region = simulated_loop_region(parse_trace(raw));
  ASSERT_TRUE(region);
  EXPECT_TRUE(region->reached_max_length);
  EXPECT_EQ(region->chunks.size(), 4u);
  EXPECT_TRUE(detect_terminal_loop(*region, 10, 3));
  EXPECT_FALSE(simulated_loop_region(parse_trace("<think>a</think>b")));
}

TEST(Compose, CanonicalLayout) {
  EXPECT_EQ(compose_response(make_hypnosis(kEasyHypnosis), "A", "B"),
            "<hypnosis>This is a simple question, let's think quickly.</hypnosis><think>A</think>B");
  EXPECT_EQ(compose_response(std::nullopt, "A", "B"), "<think>A</think>B");
}

// Round trip and chunk reconstruction over random compositions.
TEST(RoundTrip, RandomTraces) {
  fixtures::RandomTraceGen gen(2024);
  int failures = 0;
  for (int i = 0; i < 20000; ++i) {
    const auto raw = gen.next();
    const auto t = parse_trace(raw);
    if (serialize_trace(t) != raw) ++failures;
    Chunking c{t.chunks, t.trailing_separators};
    if (c.join() != t.thoughts) ++failures;
    std::vector<std::string> texts;
    for (const auto& ch : t.chunks) texts.push_back(ch.text);
    if (texts != naive_segments(t.thoughts)) ++failures;
    for (std::size_t k = 0; k < t.chunks.size(); ++k) {
      if (t.chunks[k].index != static_cast<int>(k)) ++failures;
    }
  }
  EXPECT_EQ(failures, 0);
}
