#include "cogtune/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <stdexcept>

#include "cogtune/answer_judge.hpp"
#include "cogtune/util.hpp"

namespace cogtune {

using nlohmann::json;

std::string_view to_string(PromptMode m) {
  switch (m) {
    case PromptMode::standard: return "default";
    case PromptMode::d_prompt: return "d_prompt";
    case PromptMode::nothinking: return "nothinking";
    case PromptMode::forced_prefix_matched: return "forced_prefix_matched";
    case PromptMode::forced_prefix_unmatched: return "forced_prefix_unmatched";
  }
  return "default";
}

PromptMode parse_prompt_mode(std::string_view s) {
  for (auto m : {PromptMode::standard, PromptMode::d_prompt, PromptMode::nothinking,
                 PromptMode::forced_prefix_matched, PromptMode::forced_prefix_unmatched}) {
    if (s == to_string(m)) return m;
  }
  throw Error("unknown prompt mode '" + std::string(s) + "'");
}

long ApproxTokenCounter::count(std::string_view text) const {
  long n = 0;
  bool in_word = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      in_word = false;
    } else if (std::ispunct(c)) {
      ++n;
      in_word = false;
    } else if (!in_word) {
      ++n;
      in_word = true;
    }
  }
  return n;
}

int max_new_tokens_for(const Problem& p, const EvalOptions& options) {
  if (options.max_new_tokens) return *options.max_new_tokens;
  return p.source == Source::aime ? options.aime_max_new_tokens : options.default_max_new_tokens;
}

std::optional<std::string> forced_prefix(PromptMode mode, Difficulty gold,
                                         const EvalOptions& options) {
  const bool easy = gold == Difficulty::Easy;
  switch (mode) {
    case PromptMode::nothinking: return options.templates.nothinking_prefix;
    case PromptMode::forced_prefix_matched:
      return easy ? options.hypnosis.easy : options.hypnosis.hard;
    case PromptMode::forced_prefix_unmatched:
      return easy ? options.hypnosis.hard : options.hypnosis.easy;
    case PromptMode::standard:
    case PromptMode::d_prompt: return std::nullopt;
  }
  return std::nullopt;
}

GenerationRequest build_eval_request(const Problem& p, const EvalOptions& options) {
  GenerationRequest r;
  r.model_role = options.model_role;
  r.system_prompt = options.templates.system_prompt;
  const auto& tmpl =
      options.mode == PromptMode::d_prompt ? options.templates.d_prompt : options.templates.user;
  r.user_prompt = render_template(tmpl, {{"question", p.question}});
  r.max_new_tokens = max_new_tokens_for(p, options);
  r.assistant_prefix = forced_prefix(options.mode, scoring_difficulty(p), options);
  return r;
}

std::optional<double> difficulty_cognition_rate(const std::vector<Trace>& traces,
                                                const std::vector<Difficulty>& gold,
                                                const HypnosisVocabulary& vocabulary) {
  if (traces.size() != gold.size()) throw std::invalid_argument("traces and gold labels differ in size");
  std::size_t labelled = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (gold[i] == Difficulty::Excluded) continue;
    ++labelled;
    if (!traces[i].hypnosis) continue;
    const auto cat = classify_hypnosis(traces[i].hypnosis->body, vocabulary);
    const auto want = gold[i] == Difficulty::Easy ? HypnosisCategory::difficulty_easy
                                                  : HypnosisCategory::difficulty_hard;
    hits += cat == want;
  }
  if (labelled == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(labelled);
}

namespace {

PartitionStat partition_means(const std::vector<double>& values, const std::vector<bool>& correct) {
  if (values.size() != correct.size()) throw std::invalid_argument("traces and grades differ in size");
  double sum[3] = {0, 0, 0};
  std::size_t n[3] = {0, 0, 0};
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int part = correct[i] ? 1 : 2;
    sum[0] += values[i];
    ++n[0];
    sum[part] += values[i];
    ++n[part];
  }
  auto mean = [&](int k) -> std::optional<double> {
    if (n[k] == 0) return std::nullopt;
    return sum[k] / static_cast<double>(n[k]);
  };
  return {mean(0), mean(1), mean(2)};
}

}  // namespace

PartitionStat reflection_stats(const std::vector<Trace>& traces, const std::vector<bool>& correct) {
  std::vector<double> counts;
  counts.reserve(traces.size());
  for (const auto& t : traces) {
    counts.push_back(static_cast<double>(std::count_if(
        t.chunks.begin(), t.chunks.end(), [](const Chunk& c) { return c.kind == ChunkKind::reflective; })));
  }
  return partition_means(counts, correct);
}

PartitionStat loop_stats(const std::vector<Trace>& traces, const std::vector<bool>& correct,
                         int window, int min_repeats) {
  std::vector<double> flags;
  flags.reserve(traces.size());
  for (const auto& t : traces) flags.push_back(detect_terminal_loop(t, window, min_repeats) ? 1.0 : 0.0);
  return partition_means(flags, correct);
}

std::vector<HistogramBucket> length_histogram(const std::vector<long>& tokens,
                                              const std::vector<bool>& correct, long bucket) {
  if (bucket <= 0) throw std::invalid_argument("histogram bucket width must be positive");
  if (tokens.size() != correct.size()) throw std::invalid_argument("tokens and grades differ in size");
  std::vector<HistogramBucket> out;
  if (tokens.empty()) return out;
  const long top = *std::max_element(tokens.begin(), tokens.end());
  for (long lo = 0; lo <= top; lo += bucket) out.push_back({lo, lo + bucket, 0, 0});
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto& b = out[static_cast<std::size_t>(std::max(0L, tokens[i]) / bucket)];
    ++(correct[i] ? b.correct : b.incorrect);
  }
  return out;
}

EvalReport summarize(const std::vector<EvalRecord>& records, const EvalOptions& options) {
  EvalReport r;
  r.run_id = options.run_id;
  r.prompt_mode = options.mode;
  r.n_problems = records.size();

  std::vector<Trace> traces;
  std::vector<bool> correct;
  std::vector<long> tokens;
  std::vector<Difficulty> gold;
  double latency = 0.0;
  for (const auto& rec : records) {
    if (rec.failed()) {
      r.failed_ids.push_back(rec.problem_id);
      continue;
    }
    if (r.token_counter.empty()) {
      r.token_counter = rec.token_counter;
    } else if (r.token_counter != rec.token_counter) {
      throw Error("run '" + options.run_id + "' mixes token counters");
    }
    traces.push_back(rec.trace);
    correct.push_back(rec.correct);
    tokens.push_back(rec.tokens);
    gold.push_back(rec.cognition_gold);
    latency += rec.trace.latency_seconds;
    r.n_correct += rec.correct;
    r.n_needs_review += rec.needs_review;
  }
  r.n_scored = traces.size();
  if (r.n_scored > 0) {
    const auto n = static_cast<double>(r.n_scored);
    r.accuracy = static_cast<double>(r.n_correct) / n;
    r.mean_tokens = static_cast<double>(std::accumulate(tokens.begin(), tokens.end(), 0L)) / n;
    r.mean_latency_seconds = latency / n;
  }
  r.cognition_rate = difficulty_cognition_rate(traces, gold, options.chunker.vocabulary);
  r.reflection_stats = reflection_stats(traces, correct);
  r.loop_ratio = loop_stats(traces, correct, options.chunker.loop_window, options.chunker.loop_min_repeats);
  r.length_histogram = length_histogram(tokens, correct, options.histogram_bucket);
  return r;
}

std::string problem_set_digest(const ProblemSet& problems) {
  json j = json::array();
  for (const auto& p : problems) j.push_back({p.id, p.question, p.reference_answer});
  return sha256_hex(j.dump());
}

EvalRun evaluate_run(const ProblemSet& problems, ModelGateway& gateway, const EvalOptions& options) {
  if (problems.empty()) throw std::invalid_argument("evaluation needs a non-empty problem set");
  std::vector<GenerationRequest> requests;
  for (const auto& p : problems) requests.push_back(build_eval_request(p, options));
  const auto results = gateway.collect_batch(requests, options.parallelism);

  EvalRun run;
  bool all_provider = true;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& p = problems.problems()[i];
    EvalRecord rec;
    rec.problem_id = p.id;
    rec.source = p.source;
    rec.gold = scoring_difficulty(p);
    rec.cognition_gold = assign_difficulty(p, DifficultyPolicy::eval);
    if (!results[i].ok()) {
      rec.error = results[i].error;
      run.records.push_back(std::move(rec));
      continue;
    }
    const auto& res = *results[i].result;
    rec.response = requests[i].assistant_prefix.value_or("") + res.text;
    rec.trace = parse_trace(rec.response, options.chunker);
    rec.trace.problem_id = p.id;
    rec.trace.reached_max_length = res.reached_max_length;
    rec.trace.latency_seconds = res.latency_seconds;
    const auto g = grade(extract_final_answer(rec.response), p.reference_answer);
    rec.correct = g.correct;
    rec.needs_review = g.needs_review;
    rec.provider_tokens = res.completion_tokens;
    all_provider = all_provider && res.completion_tokens.has_value();
    // Approximate count of the continuation; replaced below if every record has provider usage.
    rec.tokens = options.tokenizer->count(res.text);
    rec.looped = detect_terminal_loop(rec.trace, options.chunker.loop_window,
                                      options.chunker.loop_min_repeats);
    run.records.push_back(std::move(rec));
  }
  for (auto& rec : run.records) {
    if (rec.failed()) continue;
    if (all_provider) {
      rec.tokens = *rec.provider_tokens;
      rec.token_counter = kProviderCounter;
    } else {
      rec.token_counter = options.tokenizer->name();
    }
  }
  run.report = summarize(run.records, options);
  run.report.problem_set_sha256 = problem_set_digest(problems);
  return run;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(); }

std::optional<double> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

}  // namespace

json to_json(const PartitionStat& s) {
  return {{"overall", opt(s.overall)}, {"correct", opt(s.correct)}, {"incorrect", opt(s.incorrect)}};
}

PartitionStat partition_stat_from_json(const json& j) {
  return {opt_from(j, "overall"), opt_from(j, "correct"), opt_from(j, "incorrect")};
}

json to_json(const EvalReport& r) {
  json hist = json::array();
  for (const auto& b : r.length_histogram) {
    hist.push_back({{"lower", b.lower}, {"upper", b.upper}, {"correct", b.correct}, {"incorrect", b.incorrect}});
  }
  return {{"run_id", r.run_id},
          {"prompt_mode", to_string(r.prompt_mode)},
          {"problem_set_sha256", r.problem_set_sha256},
          {"n_problems", r.n_problems},
          {"n_scored", r.n_scored},
          {"n_correct", r.n_correct},
          {"n_needs_review", r.n_needs_review},
          {"failed_ids", r.failed_ids},
          {"accuracy", r.accuracy},
          {"mean_tokens", r.mean_tokens},
          {"mean_latency_seconds", r.mean_latency_seconds},
          {"token_counter", r.token_counter},
          {"cognition_rate", opt(r.cognition_rate)},
          {"reflection_stats", to_json(r.reflection_stats)},
          {"loop_ratio", to_json(r.loop_ratio)},
          {"length_histogram", hist}};
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport r;
  r.run_id = j.at("run_id").get<std::string>();
  r.prompt_mode = parse_prompt_mode(j.at("prompt_mode").get<std::string>());
  r.problem_set_sha256 = j.value("problem_set_sha256", "");
  r.n_problems = j.at("n_problems").get<std::size_t>();
  r.n_scored = j.at("n_scored").get<std::size_t>();
  r.n_correct = j.at("n_correct").get<std::size_t>();
  r.n_needs_review = j.value("n_needs_review", std::size_t{0});
  r.failed_ids = j.value("failed_ids", std::vector<std::string>{});
  r.accuracy = j.at("accuracy").get<double>();
  r.mean_tokens = j.at("mean_tokens").get<double>();
  r.mean_latency_seconds = j.at("mean_latency_seconds").get<double>();
  r.token_counter = j.value("token_counter", "");
  r.cognition_rate = opt_from(j, "cognition_rate");
  r.reflection_stats = partition_stat_from_json(j.at("reflection_stats"));
  r.loop_ratio = partition_stat_from_json(j.at("loop_ratio"));
  for (const auto& b : j.at("length_histogram")) {
    r.length_histogram.push_back({b.at("lower").get<long>(), b.at("upper").get<long>(),
                                  b.at("correct").get<std::size_t>(), b.at("incorrect").get<std::size_t>()});
  }
  return r;
}

json to_json(const EvalRecord& r) {
  json j = {{"problem_id", r.problem_id},
            {"source", to_string(r.source)},
            {"gold", to_string(r.gold)},
            {"cognition_gold", to_string(r.cognition_gold)}};
  if (r.failed()) {
    j["error"] = r.error;
    return j;
  }
  j["response"] = r.response;
  j["hypnosis"] = r.trace.hypnosis ? json(r.trace.hypnosis->body) : json();
  j["correct"] = r.correct;
  j["needs_review"] = r.needs_review;
  j["tokens"] = r.tokens;
  j["token_counter"] = r.token_counter;
  j["latency_seconds"] = r.trace.latency_seconds;
  j["reached_max_length"] = r.trace.reached_max_length;
  j["reflective_chunks"] = std::count_if(r.trace.chunks.begin(), r.trace.chunks.end(),
                                         [](const Chunk& c) { return c.kind == ChunkKind::reflective; });
  j["looped"] = r.looped;
  j["error"] = nullptr;
  return j;
}

void write_traces(const std::vector<EvalRecord>& records, const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  write_file_atomic(path, out);
}

}  // namespace cogtune
