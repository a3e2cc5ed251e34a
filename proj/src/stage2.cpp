#include "cogtune/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <regex>
#include <set>
#include <stdexcept>

#include "cogtune/answer_judge.hpp"
#include "cogtune/util.hpp"

namespace cogtune {

using nlohmann::json;

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::contributes: return "contributes";
    case Verdict::redundant: return "redundant";
    case Verdict::loop_candidate: return "loop_candidate";
  }
  return "contributes";
}

std::optional<Verdict> parse_judge_reply(std::string_view reply) {
  const auto close = reply.rfind(kThinkClose);
  const std::string tail = to_lower(close == std::string_view::npos
                                        ? reply
                                        : reply.substr(close + kThinkClose.size()));
  std::optional<Verdict> found;
  std::size_t best = 0;
  const std::pair<std::string_view, Verdict> tokens[] = {{"contributes", Verdict::contributes},
                                                         {"redundant", Verdict::redundant},
                                                         {"loop", Verdict::loop_candidate}};
  for (const auto& [tok, verdict] : tokens) {
    std::size_t pos = 0;
    while ((pos = tail.find(tok, pos)) != std::string::npos) {
      const std::size_t end = pos + tok.size();
      const bool bounded = (pos == 0 || !is_word_char(tail[pos - 1])) &&
                           (end == tail.size() || !is_word_char(tail[end]));
      if (bounded && (!found || pos >= best)) {
        found = verdict;
        best = pos;
      }
      pos = end;
    }
  }
  return found;
}

namespace {

bool equation_char(unsigned char c) {
  return std::isalnum(c) != 0 || c == '.' || c == '+' || c == '-' || c == '*' || c == '/' ||
         c == '^' || c == '(' || c == ')' || c == '\\' || c == '{' || c == '}' || c >= 0x80;
}

std::string canonical_number(std::string token) {
  token.erase(std::remove(token.begin(), token.end(), ','), token.end());
  if (auto r = parse_exact_number(token)) {
    return r->num.str() + (r->den == 1 ? std::string() : "/" + r->den.str());
  }
  return token;
}

std::string context_before(const Trace& trace, int chunk_index) {
  Chunking c;
  c.chunks.assign(trace.chunks.begin(), trace.chunks.begin() + chunk_index);
  return c.join();
}

}  // namespace

ChunkFacts extract_chunk_facts(std::string_view text) {
  ChunkFacts facts;
  static const std::regex number(R"(\d+(?:,\d{3})*(?:\.\d+)?(?:/\d+)?)");
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), number); it != std::sregex_iterator();
       ++it) {
    facts.numbers.push_back(canonical_number(it->str()));
  }

  // Prose words (two or more letters, not a command) end an equation.
  static const std::regex word(R"((^|[^A-Za-z\\])[A-Za-z]{2,})");
  static const std::regex thousands(R"((\d),(\d{3})(?!\d))");
  std::string bounded = std::regex_replace(s, word, "$1;");
  for (std::string prev; prev != bounded;) {
    prev = bounded;
    bounded = std::regex_replace(bounded, thousands, "$1$2");
  }
  std::string compact;
  for (char c : bounded) {
    if (!std::isspace(static_cast<unsigned char>(c))) compact.push_back(c);
  }
  for (std::size_t eq = compact.find('='); eq != std::string::npos;
       eq = compact.find('=', eq + 1)) {
    std::size_t b = eq;
    while (b > 0 && equation_char(static_cast<unsigned char>(compact[b - 1]))) --b;
    std::size_t e = eq + 1;
    while (e < compact.size() && equation_char(static_cast<unsigned char>(compact[e]))) ++e;
    auto lhs = compact.substr(b, eq - b);
    auto rhs = compact.substr(eq + 1, e - eq - 1);
    while (!rhs.empty() && rhs.back() == '.') rhs.pop_back();
    if (!lhs.empty() && !rhs.empty()) facts.equations.push_back(lhs + "=" + rhs);
  }
  return facts;
}

DeterminatorVerdict judge_chunk_rule_based(const Trace& trace, int chunk_index) {
  if (chunk_index < 0 || chunk_index >= static_cast<int>(trace.chunks.size())) {
    throw std::out_of_range("chunk index " + std::to_string(chunk_index) + " out of range");
  }
  DeterminatorVerdict v;
  v.chunk_index = chunk_index;
  v.mode = DeterminatorMode::rule_based;
  const auto& chunk = trace.chunks[static_cast<std::size_t>(chunk_index)];
  if (chunk.kind != ChunkKind::reflective) {
    v.rationale = "not a reflective chunk";
    return v;
  }
  std::set<std::string> known_numbers;
  std::set<std::string> known_equations;
  for (int i = 0; i < chunk_index; ++i) {
    auto f = extract_chunk_facts(trace.chunks[static_cast<std::size_t>(i)].text);
    known_numbers.insert(f.numbers.begin(), f.numbers.end());
    known_equations.insert(f.equations.begin(), f.equations.end());
  }
  const auto facts = extract_chunk_facts(chunk.text);
  for (const auto& n : facts.numbers) {
    if (known_numbers.count(n) == 0) {
      v.rationale = "introduces new number " + n;
      return v;
    }
  }
  for (const auto& e : facts.equations) {
    if (known_equations.count(e) == 0) {
      v.rationale = "introduces new equation " + e;
      return v;
    }
  }
  v.verdict = Verdict::redundant;
  v.rationale = "reflective chunk restates known results";
  return v;
}

namespace {

GenerationRequest judge_request(const Trace& trace, int chunk_index, const JudgeContext& ctx,
                                int attempt) {
  GenerationRequest r;
  r.model_role = ModelRole::judge;
  r.max_new_tokens = ctx.max_new_tokens;
  r.user_prompt = render_template(
      ctx.templates.judge_redundancy,
      {{"question", ctx.question},
       {"context", context_before(trace, chunk_index)},
       {"chunk", trace.chunks[static_cast<std::size_t>(chunk_index)].text}});
  if (attempt > 0) {
    r.user_prompt += render_template(ctx.templates.judge_retry_suffix,
                                     {{"attempt", std::to_string(attempt + 1)}});
  }
  return r;
}

}  // namespace

std::vector<DeterminatorVerdict> judge_chunks(const Trace& trace, const std::vector<int>& indices,
                                              DeterminatorMode mode, const JudgeContext& ctx) {
  for (int idx : indices) {
    if (idx < 0 || idx >= static_cast<int>(trace.chunks.size())) {
      throw std::out_of_range("chunk index " + std::to_string(idx) + " out of range");
    }
  }
  std::vector<DeterminatorVerdict> out;
  if (mode == DeterminatorMode::rule_based) {
    for (int idx : indices) out.push_back(judge_chunk_rule_based(trace, idx));
    return out;
  }
  if (ctx.gateway == nullptr) throw Error("llm_judge mode requires a judge endpoint");

  out.resize(indices.size());
  std::vector<std::size_t> pending(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    pending[i] = i;
    out[i].chunk_index = indices[i];
    out[i].mode = DeterminatorMode::llm_judge;
  }
  for (int attempt = 0; attempt <= ctx.retries && !pending.empty(); ++attempt) {
    std::vector<GenerationRequest> requests;
    for (auto i : pending) requests.push_back(judge_request(trace, indices[i], ctx, attempt));
    const auto results = ctx.gateway->collect_batch(requests, ctx.parallelism);
    std::vector<std::size_t> still;
    for (std::size_t k = 0; k < pending.size(); ++k) {
      auto& v = out[pending[k]];
      std::optional<Verdict> parsed;
      if (results[k].ok()) parsed = parse_judge_reply(results[k].result->text);
      if (parsed) {
        v.verdict = *parsed;
        v.rationale = "judge: " + std::string(to_string(*parsed));
      } else {
        v.rationale = results[k].ok() ? "unparseable judge reply" : results[k].error;
        still.push_back(pending[k]);
      }
    }
    pending = std::move(still);
  }
  for (auto i : pending) {
    out[i].verdict = Verdict::contributes;
    out[i].rationale += "; defaulted to contributes";
  }
  return out;
}

DeterminatorVerdict judge_chunk(const Trace& trace, int chunk_index, DeterminatorMode mode,
                                const JudgeContext& ctx) {
  return judge_chunks(trace, {chunk_index}, mode, ctx).front();
}

namespace {

Trace parse_sample(const SftSample& sample, const TransformOptions& options) {
  auto t = parse_trace(sample.response, options.chunker);
  if (!t.has_think_close || t.malformed) {
    throw IneligibleSample("sample '" + sample.problem_id + "' has no closed think segment");
  }
  return t;
}

std::string prefix_of(const Trace& trace, int count) {
  Chunking c;
  c.chunks.assign(trace.chunks.begin(), trace.chunks.begin() + count);
  return c.join();
}

std::string answer_conclusion(const SftSample& sample, const TransformOptions& options) {
  if (trim_view(sample.reference_answer).empty()) {
    throw Error("sample '" + sample.problem_id + "' has no reference answer");
  }
  return render_template(options.templates.conclusion, {{"answer", sample.reference_answer}});
}

}  // namespace

SftSample apply_redundancy_truncation(const SftSample& sample, int m,
                                      const TransformOptions& options) {
  if (m < 1) throw std::invalid_argument("truncation point m must be >= 1");
  const auto trace = parse_sample(sample, options);
  if (m >= static_cast<int>(trace.chunks.size())) {
    throw std::out_of_range("truncation point beyond the last chunk");
  }
  const auto tag = make_hypnosis(options.hypnosis.redundancy).serialize();
  const std::string thoughts =
      prefix_of(trace, m) + std::string(kChunkDelimiter) + tag + "\n";
  if (thoughts.size() >= trace.thoughts.size()) {
    throw IneligibleSample("truncating '" + sample.problem_id + "' at chunk " +
                           std::to_string(m) + " would not shorten it");
  }
  SftSample out = sample;
  out.response = compose_response(trace.hypnosis, thoughts, answer_conclusion(sample, options));
  out.stage2_variant = Stage2Variant::redundancy_truncated;
  out.m = m;
  return out;
}

std::vector<int> loop_candidates(const Trace& trace) {
  std::vector<int> out;
  const int n = static_cast<int>(trace.chunks.size());
  if (n < 4) return out;
  for (int i = 1; i < n; ++i) {
    const auto& c = trace.chunks[static_cast<std::size_t>(i)];
    if (c.kind != ChunkKind::reflective) continue;
    // relative position i/(n-1) within [0.25, 0.75]
    if (4 * i < n - 1 || 4 * i > 3 * (n - 1)) continue;
    const auto norm = chunk_normal_form(c.text);
    if (norm.empty() || parse_hypnosis_tag(c.text)) continue;
    if (chunk_normal_form(trace.chunks[static_cast<std::size_t>(i - 1)].text) == norm) continue;
    out.push_back(i);
  }
  return out;
}

LoopOutcome simulate_loop(const SftSample& sample, std::uint64_t rng_seed, int repeats,
                          const TransformOptions& options) {
  if (repeats < 2) throw std::invalid_argument("loop repeats must be >= 2");
  Trace trace;
  try {
    trace = parse_sample(sample, options);
  } catch (const IneligibleSample&) {
    return {sample, false};
  }
  const auto eligible = loop_candidates(trace);
  if (eligible.empty()) return {sample, false};

  SeededRng rng(rng_seed);
  const int m = eligible[static_cast<std::size_t>(rng.below(eligible.size()))];
  const auto& looped = trace.chunks[static_cast<std::size_t>(m)].text;

  std::string thoughts = prefix_of(trace, m + 1);
  for (int r = 1; r < repeats; ++r) {
    thoughts += kChunkDelimiter;
    thoughts += looped;
  }
  thoughts += kChunkDelimiter;
  thoughts += make_hypnosis(options.hypnosis.loop).serialize();
  thoughts += "\n";

  LoopOutcome out{sample, true};
  out.sample.response =
      compose_response(trace.hypnosis, thoughts, answer_conclusion(sample, options));
  out.sample.stage2_variant = Stage2Variant::loop_simulated;
  out.sample.m = m;
  return out;
}

namespace {

std::uint64_t sample_seed(std::uint64_t seed, const std::string& id) {
  return seed * 0x9E3779B97F4A7C15ULL ^ stable_hash(id);
}

std::string thoughts_of(const std::string& response) { return parse_trace(response).thoughts; }

// First redundant chunk whose truncation shortens the sample.
std::optional<SftSample> try_redundancy(const SftSample& s, const Stage2Options& options) {
  Trace trace;
  try {
    trace = parse_sample(s, options.transform);
  } catch (const IneligibleSample&) {
    return std::nullopt;
  }
  std::vector<int> candidates;
  for (const auto& c : trace.chunks) {
    if (c.index >= 1 && c.kind == ChunkKind::reflective) candidates.push_back(c.index);
  }
  if (candidates.empty()) return std::nullopt;
  JudgeContext ctx = options.judge;
  ctx.question = s.question;
  ctx.chunker = options.transform.chunker;
  ctx.templates = options.transform.templates;
  const auto verdicts = judge_chunks(trace, candidates, options.judge_mode, ctx);
  for (const auto& v : verdicts) {
    if (v.verdict != Verdict::redundant) continue;
    try {
      auto out = apply_redundancy_truncation(s, v.chunk_index, options.transform);
      out.determinator_mode = options.judge_mode;
      return out;
    } catch (const IneligibleSample&) {
    }
  }
  return std::nullopt;
}

}  // namespace

Stage2Result compose_stage2(const Dataset& stage1, const Stage2Options& options) {
  Stage2Result result;
  auto& out = result.dataset;
  out.samples = stage1.samples;

  std::vector<std::size_t> hard;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    auto& s = out.samples[i];
    s.stage2_variant = Stage2Variant::none;
    s.m.reset();
    s.determinator_mode.reset();
    if (s.difficulty == Difficulty::Hard) hard.push_back(i);
  }
  std::sort(hard.begin(), hard.end(), [&](std::size_t a, std::size_t b) {
    return out.samples[a].problem_id < out.samples[b].problem_id;
  });
  SeededRng rng(options.seed);
  rng.shuffle(hard);

  const double rf = options.redundancy_fraction;
  const double lf = options.loop_fraction;
  if (rf < 0 || lf < 0 || rf + lf > 1) {
    throw std::invalid_argument("stage-2 fractions must be non-negative and sum to at most 1");
  }
  const std::size_t n = hard.size();
  const auto quota = [n](double f) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * f));
  };
  const std::size_t want_redundancy = quota(options.redundancy_fraction);
  const std::size_t want_loop = quota(options.loop_fraction);
  if (want_redundancy + want_loop > n) throw Error("stage-2 fractions exceed the Hard half");

  std::deque<std::size_t> initial_redundancy(hard.begin(), hard.begin() + want_redundancy);
  std::deque<std::size_t> initial_loop(hard.begin() + want_redundancy,
                                       hard.begin() + want_redundancy + want_loop);
  std::deque<std::size_t> reserve(hard.begin() + want_redundancy + want_loop, hard.end());

  json records = json::array();
  std::size_t ineligible_redundancy = 0;
  std::size_t ineligible_loop = 0;

  auto fill = [&](std::deque<std::size_t> queue, std::size_t want, auto&& transform,
                  std::size_t& ineligible) {
    std::size_t done = 0;
    std::vector<std::size_t> rejected;
    while (done < want) {
      std::size_t idx;
      if (!queue.empty()) {
        idx = queue.front();
        queue.pop_front();
      } else if (!reserve.empty()) {
        idx = reserve.front();
        reserve.pop_front();
      } else {
        break;
      }
      auto& s = out.samples[idx];
      if (auto t = transform(s)) {
        s = std::move(*t);
        ++done;
      } else {
        ++ineligible;
        rejected.push_back(idx);
      }
    }
    // Rejected samples stay untouched and remain available to later buckets.
    reserve.insert(reserve.end(), rejected.begin(), rejected.end());
    return done;
  };

  const auto got_redundancy =
      fill(initial_redundancy, want_redundancy,
           [&](const SftSample& s) { return try_redundancy(s, options); }, ineligible_redundancy);
  const auto got_loop = fill(
      initial_loop, want_loop,
      [&](const SftSample& s) -> std::optional<SftSample> {
        auto o = simulate_loop(s, sample_seed(options.seed, s.problem_id), options.repeats,
                               options.transform);
        if (!o.eligible) return std::nullopt;
        return std::move(o.sample);
      },
      ineligible_loop);

  if (got_redundancy < want_redundancy) {
    result.warnings.push_back("redundancy bucket short by " +
                              std::to_string(want_redundancy - got_redundancy) +
                              " samples; filled from the untouched bucket");
  }
  if (got_loop < want_loop) {
    result.warnings.push_back("loop bucket short by " + std::to_string(want_loop - got_loop) +
                              " samples; filled from the untouched bucket");
  }

  std::size_t easy = 0;
  std::size_t untouched = 0;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const auto& s = out.samples[i];
    const auto& src = stage1.samples[i];
    if (s.difficulty == Difficulty::Easy) {
      ++easy;
    } else if (s.stage2_variant == Stage2Variant::none) {
      ++untouched;
    }
    json rec = {{"problem_id", s.problem_id},
                {"difficulty", to_string(s.difficulty)},
                {"stage2_variant", to_string(s.stage2_variant)},
                {"source_bytes", src.response.size()},
                {"result_bytes", s.response.size()}};
    rec["m"] = s.m ? json(*s.m) : json();
    rec["determinator_mode"] =
        s.determinator_mode ? json(to_string(*s.determinator_mode)) : json();
    if (s.stage2_variant != Stage2Variant::none) {
      rec["source_thoughts_bytes"] = thoughts_of(src.response).size();
      rec["result_thoughts_bytes"] = thoughts_of(s.response).size();
    }
    if (s.stage2_variant == Stage2Variant::loop_simulated) {
      rec["m_selection"] = "seeded_random";
      rec["repeats"] = options.repeats;
    }
    records.push_back(std::move(rec));
  }

  out.manifest = {
      {"stage", 2},
      {"seed", options.seed},
      {"determinator_mode", to_string(options.judge_mode)},
      {"repeats", options.repeats},
      {"fractions",
       {{"redundancy", options.redundancy_fraction}, {"loop", options.loop_fraction}}},
      {"counts",
       {{"easy", easy},
        {"hard_untouched", untouched},
        {"redundancy_truncated", got_redundancy},
        {"loop_simulated", got_loop},
        {"total", out.samples.size()}}},
      {"quotas", {{"redundancy_truncated", want_redundancy}, {"loop_simulated", want_loop}}},
      {"ineligible", {{"redundancy", ineligible_redundancy}, {"loop", ineligible_loop}}},
      {"warnings", result.warnings},
      {"stage1_dataset_sha256", stage1.manifest.value("dataset_sha256", "")},
      {"transformations", records}};
  return result;
}

}  // namespace cogtune
