#include "cogtune/trace.hpp"

#include <stdexcept>

#include "cogtune/util.hpp"

namespace cogtune {

std::string_view to_string(HypnosisCategory c) {
  switch (c) {
    case HypnosisCategory::difficulty_easy: return "difficulty_easy";
    case HypnosisCategory::difficulty_hard: return "difficulty_hard";
    case HypnosisCategory::redundancy: return "redundancy";
    case HypnosisCategory::loop_break: return "loop_break";
    case HypnosisCategory::unknown: return "unknown";
  }
  return "unknown";
}

HypnosisCategory parse_hypnosis_category(std::string_view s) {
  for (auto c : {HypnosisCategory::difficulty_easy, HypnosisCategory::difficulty_hard,
                 HypnosisCategory::redundancy, HypnosisCategory::loop_break,
                 HypnosisCategory::unknown}) {
    if (to_string(c) == s) return c;
  }
  throw Error("unknown hypnosis category '" + std::string(s) + "'");
}

std::string HypnosisTag::serialize() const {
  std::string out(kHypnosisOpen);
  out += body;
  out += kHypnosisClose;
  return out;
}

HypnosisCategory classify_hypnosis(std::string_view body, const HypnosisVocabulary& vocab) {
  const auto b = trim(straighten_quotes(body));
  if (b == kEasyHypnosis) return HypnosisCategory::difficulty_easy;
  if (b == kHardHypnosis) return HypnosisCategory::difficulty_hard;
  if (b == kRedundancyHypnosis) return HypnosisCategory::redundancy;
  if (b == kLoopHypnosis) return HypnosisCategory::loop_break;

  const auto lower = to_lower(b);
  if (contains_whole_word(lower, "loop")) return HypnosisCategory::loop_break;
  if (lower.find("move on") != std::string::npos) return HypnosisCategory::redundancy;

  auto any_of = [&](const std::vector<std::string>& words) {
    for (const auto& w : words) {
      if (contains_whole_word(lower, to_lower(w))) return true;
    }
    return false;
  };
  const bool easy = any_of(vocab.easy);
  const bool hard = any_of(vocab.hard);
  if (easy == hard) return HypnosisCategory::unknown;
  return easy ? HypnosisCategory::difficulty_easy : HypnosisCategory::difficulty_hard;
}

HypnosisTag make_hypnosis(std::string_view body, const HypnosisVocabulary& vocab) {
  HypnosisTag tag;
  tag.body = trim(straighten_quotes(body));
  tag.category = classify_hypnosis(tag.body, vocab);
  return tag;
}

namespace {

struct TagMatch {
  HypnosisTag tag;
  std::size_t lead = 0;  // whitespace bytes before the tag
  std::size_t end = 0;   // offset just past </hypnosis>
};

// A hypnosis tag at the start of `text`, after optional whitespace.
std::optional<TagMatch> leading_tag(std::string_view text, const HypnosisVocabulary& vocab) {
  auto lead = text.find_first_not_of(" \t\r\n\f\v");
  if (lead == std::string_view::npos) return std::nullopt;
  if (text.substr(lead, kHypnosisOpen.size()) != kHypnosisOpen) return std::nullopt;
  const auto open_end = lead + kHypnosisOpen.size();
  const auto close = text.find(kHypnosisClose, open_end);
  if (close == std::string_view::npos) return std::nullopt;
  TagMatch m;
  m.tag = make_hypnosis(text.substr(open_end, close - open_end), vocab);
  m.lead = lead;
  m.end = close + kHypnosisClose.size();
  return m;
}

}  // namespace

std::optional<HypnosisTag> parse_hypnosis_tag(std::string_view text,
                                              const HypnosisVocabulary& vocab) {
  auto m = leading_tag(text, vocab);
  if (!m || !trim_view(text.substr(m->end)).empty()) return std::nullopt;
  return m->tag;
}

const std::vector<std::string>& default_reflection_keywords() {
  static const std::vector<std::string> kKeywords = {"Wait", "wait", "Alternatively",
                                                     "alternatively", "But", "but"};
  return kKeywords;
}

std::string Chunking::join() const {
  std::string out;
  for (const auto& c : chunks) {
    for (int i = 0; i < c.separators_before; ++i) out += kChunkDelimiter;
    out += c.text;
  }
  for (int i = 0; i < trailing_separators; ++i) out += kChunkDelimiter;
  return out;
}

Chunking chunk_thoughts(std::string_view thoughts) {
  Chunking out;
  if (thoughts.empty()) return out;
  const auto parts = split_view(thoughts, kChunkDelimiter);
  int pending = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) ++pending;
    if (parts[i].empty()) continue;
    Chunk c;
    c.index = static_cast<int>(out.chunks.size());
    c.text = std::string(parts[i]);
    c.separators_before = pending;
    pending = 0;
    out.chunks.push_back(std::move(c));
  }
  out.trailing_separators = pending;
  return out;
}

Chunk classify_reflective(Chunk chunk, const std::vector<std::string>& keywords) {
  if (keywords.empty()) throw std::invalid_argument("keyword list must be non-empty");
  chunk.kind = ChunkKind::plain;
  chunk.matched_keyword.reset();
  for (const auto& k : keywords) {
    if (contains_whole_word(chunk.text, k)) {
      chunk.kind = ChunkKind::reflective;
      chunk.matched_keyword = k;
      break;
    }
  }
  return chunk;
}

Trace parse_trace(std::string_view raw, const ChunkerConfig& config) {
  Trace t;
  t.raw = std::string(raw);

  const auto open = raw.find(kThinkOpen);
  const auto last_close = raw.rfind(kThinkClose);

  std::string_view head;         // candidate for a before-think hypnosis
  std::string_view region;       // thoughts, possibly led by an in-think hypnosis
  bool region_after_open = false;

  if (open != std::string_view::npos) {
    t.has_think_open = true;
    head = raw.substr(0, open);
    const auto body_start = open + kThinkOpen.size();
    if (last_close != std::string_view::npos && last_close >= body_start) {
      t.has_think_close = true;
      region = raw.substr(body_start, last_close - body_start);
      t.conclusion = std::string(raw.substr(last_close + kThinkClose.size()));
    } else {
      region = raw.substr(body_start);
      t.malformed = true;
    }
    region_after_open = true;
  } else if (last_close != std::string_view::npos) {
    // Close without open: the opening tag was part of the prompt template.
    t.has_think_close = true;
    region = raw.substr(0, last_close);
    t.conclusion = std::string(raw.substr(last_close + kThinkClose.size()));
  } else {
    // No delimiters: a leading tag is still a hypnosis; the rest is conclusion.
    if (auto m = leading_tag(raw, config.vocabulary)) {
      t.hypnosis = m->tag;
      t.hypnosis_lead = std::string(raw.substr(0, m->lead));
      t.hypnosis_source = std::string(raw.substr(m->lead, m->end - m->lead));
      t.conclusion = std::string(raw.substr(m->end));
    } else {
      t.conclusion = t.raw;
    }
  }

  if (t.has_think_open || t.has_think_close) {
    std::optional<TagMatch> head_tag;
    if (t.has_think_open) head_tag = leading_tag(head, config.vocabulary);
    if (head_tag) {
      t.placement = HypnosisPlacement::before_think;
      t.hypnosis = head_tag->tag;
      t.hypnosis_lead = std::string(head.substr(0, head_tag->lead));
      t.hypnosis_source = std::string(head.substr(head_tag->lead, head_tag->end - head_tag->lead));
      t.gap = std::string(head.substr(head_tag->end));
      t.thoughts = std::string(region);
    } else {
      t.lead = std::string(head);
      if (auto in_tag = leading_tag(region, config.vocabulary)) {
        t.placement = region_after_open ? HypnosisPlacement::after_think_open
                                        : HypnosisPlacement::before_think;
        t.hypnosis = in_tag->tag;
        t.hypnosis_lead = std::string(region.substr(0, in_tag->lead));
        t.hypnosis_source =
            std::string(region.substr(in_tag->lead, in_tag->end - in_tag->lead));
        t.thoughts = std::string(region.substr(in_tag->end));
      } else {
        t.thoughts = std::string(region);
      }
    }
  }

  auto chunking = chunk_thoughts(t.thoughts);
  t.trailing_separators = chunking.trailing_separators;
  t.chunks.reserve(chunking.chunks.size());
  for (auto& c : chunking.chunks) {
    t.chunks.push_back(classify_reflective(std::move(c), config.keywords));
  }
  return t;
}

std::string serialize_trace(const Trace& t) {
  std::string out = t.lead;
  const std::string tag = t.hypnosis
                              ? (t.hypnosis_source.empty() ? t.hypnosis->serialize()
                                                           : t.hypnosis_source)
                              : std::string();
  const bool before = t.hypnosis && t.placement == HypnosisPlacement::before_think;
  const bool after = t.hypnosis && t.placement == HypnosisPlacement::after_think_open;
  if (before) out += t.hypnosis_lead + tag + t.gap;
  if (t.has_think_open) out += kThinkOpen;
  if (after) out += t.hypnosis_lead + tag;
  out += t.thoughts;
  if (t.has_think_close) out += kThinkClose;
  out += t.conclusion;
  return out;
}

std::string compose_response(const std::optional<HypnosisTag>& hypnosis,
                             std::string_view thoughts, std::string_view conclusion) {
  std::string out;
  if (hypnosis) out += hypnosis->serialize();
  out += kThinkOpen;
  out += thoughts;
  out += kThinkClose;
  out += conclusion;
  return out;
}

std::string chunk_normal_form(std::string_view text) {
  auto s = collapse_whitespace(text);
  while (!s.empty()) {
    const char c = s.back();
    if (c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' || c == ' ') {
      s.pop_back();
    } else {
      break;
    }
  }
  return s;
}

bool detect_terminal_loop(const Trace& trace, int window, int min_repeats) {
  if (min_repeats < 2 || window < min_repeats) {
    throw std::invalid_argument("detect_terminal_loop requires window >= min_repeats >= 2");
  }
  if (!trace.reached_max_length) return false;
  const auto n = static_cast<int>(trace.chunks.size());
  const int start = n > window ? n - window : 0;
  int run = 0;
  std::string prev;
  for (int i = start; i < n; ++i) {
    auto norm = chunk_normal_form(trace.chunks[static_cast<std::size_t>(i)].text);
    run = (i > start && norm == prev) ? run + 1 : 1;
    if (run >= min_repeats) return true;
    prev = std::move(norm);
  }
  return false;
}

std::optional<Trace> simulated_loop_region(const Trace& trace, const ChunkerConfig& config) {
  for (std::size_t i = 0; i < trace.chunks.size(); ++i) {
    const auto tag = parse_hypnosis_tag(trace.chunks[i].text, config.vocabulary);
    if (!tag || tag->category != HypnosisCategory::loop_break) continue;
    Trace region = trace;
    region.chunks.resize(i);
    region.trailing_separators = 0;
    Chunking c{region.chunks, 0};
    region.thoughts = c.join();
    region.has_think_close = false;
    region.conclusion.clear();
    region.reached_max_length = true;
    region.raw = serialize_trace(region);
    return region;
  }
  return std::nullopt;
}

}  // namespace cogtune
