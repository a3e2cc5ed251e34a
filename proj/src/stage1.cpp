#include "cogtune/stage1.hpp"

#include <sstream>

#include "cogtune/answer_judge.hpp"
#include "cogtune/util.hpp"

namespace cogtune {

using nlohmann::json;

std::pair<ProblemSet, ProblemSet> split_training_problems(const ProblemSet& problems) {
  ProblemSet easy;
  ProblemSet hard;
  for (const auto& p : problems) {
    if (p.split != Split::train) continue;
    switch (assign_difficulty(p, DifficultyPolicy::train)) {
      case Difficulty::Easy: easy.add(p); break;
      case Difficulty::Hard: hard.add(p); break;
      case Difficulty::Excluded: break;
    }
  }
  return {std::move(easy), std::move(hard)};
}

PoolSet build_pools(const ProblemSet& easy, const ProblemSet& hard, ModelGateway& gateway,
                    const CollectOptions& options) {
  for (const auto& p : easy) {
    if (assign_difficulty(p, DifficultyPolicy::train) != Difficulty::Easy) {
      throw Error("problem '" + p.id + "' is not Easy under the train policy");
    }
  }
  for (const auto& p : hard) {
    if (assign_difficulty(p, DifficultyPolicy::train) != Difficulty::Hard) {
      throw Error("problem '" + p.id + "' is not Hard under the train policy");
    }
  }

  struct Slot {
    ResponsePool* pool;
    const Problem* problem;
  };
  PoolSet pools;
  pools.short_easy.model_role = ModelRole::short_cot;
  pools.long_easy.model_role = ModelRole::long_cot;
  pools.long_hard.model_role = ModelRole::long_cot;

  std::vector<GenerationRequest> requests;
  std::vector<Slot> slots;
  auto enqueue = [&](ResponsePool& pool, const ProblemSet& set) {
    for (const auto& p : set) {
      GenerationRequest r;
      r.model_role = pool.model_role;
      r.system_prompt = options.templates.system_prompt;
      r.user_prompt = render_template(options.templates.user, {{"question", p.question}});
      r.max_new_tokens = options.max_new_tokens;
      requests.push_back(std::move(r));
      slots.push_back({&pool, &p});
    }
  };
  enqueue(pools.short_easy, easy);
  enqueue(pools.long_easy, easy);
  enqueue(pools.long_hard, hard);

  const auto results = gateway.collect_batch(requests, options.parallelism);
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto& pool = *slots[i].pool;
    const auto& problem = *slots[i].problem;
    if (!results[i].ok()) {
      pool.failures[problem.id] = results[i].error;
      continue;
    }
    const auto& r = *results[i].result;
    auto trace = parse_trace(r.text, options.chunker);
    trace.problem_id = problem.id;
    trace.reached_max_length = r.reached_max_length;
    trace.latency_seconds = r.latency_seconds;
    if (response_is_correct(r.text, problem.reference_answer)) pool.correct_ids.insert(problem.id);
    pool.entries.emplace(problem.id, std::move(trace));
  }
  return pools;
}

double overlap_ratio(const ResponsePool& short_pool, const ResponsePool& long_pool) {
  if (long_pool.correct_ids.empty()) {
    throw Error("overlap ratio undefined: long-CoT pool has no correct responses");
  }
  std::size_t both = 0;
  for (const auto& id : long_pool.correct_ids) both += short_pool.correct_ids.count(id);
  return static_cast<double>(both) / static_cast<double>(long_pool.correct_ids.size());
}

void write_pool(const ResponsePool& pool, const std::filesystem::path& path) {
  std::string out;
  for (const auto& [id, trace] : pool.entries) {
    json j = {{"problem_id", id},
              {"role", to_string(pool.model_role)},
              {"response", trace.raw},
              {"correct", pool.correct_ids.count(id) != 0},
              {"reached_max_length", trace.reached_max_length},
              {"latency_seconds", trace.latency_seconds},
              {"error", nullptr}};
    out += j.dump() + "\n";
  }
  for (const auto& [id, err] : pool.failures) {
    json j = {{"problem_id", id},
              {"role", to_string(pool.model_role)},
              {"response", nullptr},
              {"correct", false},
              {"error", err}};
    out += j.dump() + "\n";
  }
  write_file_atomic(path, out);
}

ResponsePool read_pool(const std::filesystem::path& path, const ProblemSet& problems,
                       const ChunkerConfig& chunker) {
  ResponsePool pool;
  std::istringstream in(read_file(path));
  std::string line;
  bool role_set = false;
  while (std::getline(in, line)) {
    if (trim_view(line).empty()) continue;
    const auto j = json::parse(line);
    const auto id = j.at("problem_id").get<std::string>();
    const auto role = parse_model_role(j.at("role").get<std::string>());
    if (role_set && role != pool.model_role) throw Error(path.string() + ": mixed model roles");
    pool.model_role = role;
    role_set = true;
    if (!j.at("error").is_null()) {
      pool.failures[id] = j["error"].get<std::string>();
      continue;
    }
    const auto text = j.at("response").get<std::string>();
    auto trace = parse_trace(text, chunker);
    trace.problem_id = id;
    trace.reached_max_length = j.value("reached_max_length", false);
    trace.latency_seconds = j.value("latency_seconds", 0.0);
    if (response_is_correct(text, problems.at(id).reference_answer)) pool.correct_ids.insert(id);
    pool.entries.emplace(id, std::move(trace));
  }
  return pool;
}

std::string pool_digest(const ResponsePool& pool) {
  json j = json::object();
  j["role"] = to_string(pool.model_role);
  for (const auto& [id, trace] : pool.entries) j["entries"][id] = trace.raw;
  j["correct"] = json(pool.correct_ids);
  return sha256_hex(j.dump());
}

SftSample inject_difficulty_hypnosis(SftSample sample, const HypnosisStrings& strings) {
  const auto parsed = parse_trace(sample.response);
  if (parsed.hypnosis) {
    throw Error("sample '" + sample.problem_id + "' already carries a hypnosis");
  }
  std::string body;
  switch (sample.difficulty) {
    case Difficulty::Easy: body = strings.easy; break;
    case Difficulty::Hard: body = strings.hard; break;
    case Difficulty::Excluded:
      throw Error("sample '" + sample.problem_id + "' has no Easy/Hard label");
  }
  sample.response = make_hypnosis(body).serialize() + sample.response;
  return sample;
}

namespace {

// Short-CoT answers have no think segment; the whole reply becomes the
// thoughts and a templated answer line the conclusion.
std::optional<std::string> wrap_short_response(const Trace& trace, const Stage1Options& options) {
  if (trace.has_think_open || trace.has_think_close) {
    if (trace.malformed) return std::nullopt;
    return compose_response(std::nullopt, trace.thoughts, trace.conclusion);
  }
  const auto answer = extract_final_answer(trace.raw);
  if (answer.source == ExtractionSource::none) return std::nullopt;
  const std::string thoughts = "\n" + trim(trace.raw) + "\n";
  const auto conclusion = render_template(options.templates.conclusion, {{"answer", answer.raw}});
  return compose_response(std::nullopt, thoughts, conclusion);
}

std::optional<std::string> wrap_long_response(const Trace& trace) {
  if (trace.malformed || !trace.has_think_close || trace.reached_max_length) return std::nullopt;
  return compose_response(std::nullopt, trace.thoughts, trace.conclusion);
}

}  // namespace

Dataset build_draft_dataset(const ResponsePool& short_easy, const ResponsePool& long_hard,
                            const ProblemSet& problems, const Stage1Options& options) {
  Dataset draft;
  std::size_t unwrappable = 0;
  std::size_t failed_recheck = 0;
  std::size_t had_hypnosis = 0;

  auto emit = [&](const ResponsePool& pool, Difficulty difficulty) {
    for (const auto& id : pool.correct_ids) {
      const auto& trace = pool.entries.at(id);
      const auto& problem = problems.at(id);
      if (trace.hypnosis) {
        ++had_hypnosis;
        continue;
      }
      const auto body = difficulty == Difficulty::Easy ? wrap_short_response(trace, options)
                                                       : wrap_long_response(trace);
      if (!body) {
        ++unwrappable;
        continue;
      }
      SftSample s;
      s.problem_id = id;
      s.question = problem.question;
      s.reference_answer = problem.reference_answer;
      s.response = *body;
      s.difficulty = difficulty;
      s.provenance = pool.model_role;
      s = inject_difficulty_hypnosis(std::move(s), options.hypnosis);
      if (!response_is_correct(s.response, s.reference_answer)) {
        ++failed_recheck;
        continue;
      }
      draft.samples.push_back(std::move(s));
    }
  };
  emit(short_easy, Difficulty::Easy);
  emit(long_hard, Difficulty::Hard);

  std::size_t easy = 0;
  for (const auto& s : draft.samples) easy += s.difficulty == Difficulty::Easy;
  draft.manifest = {{"stage", "draft"},
                    {"counts",
                     {{"easy", easy},
                      {"hard", draft.samples.size() - easy},
                      {"total", draft.samples.size()}}},
                    {"excluded",
                     {{"unwrappable", unwrappable},
                      {"failed_recheck", failed_recheck},
                      {"preexisting_hypnosis", had_hypnosis}}},
                    {"sources",
                     {{"short_easy_pool_sha256", pool_digest(short_easy)},
                      {"long_hard_pool_sha256", pool_digest(long_hard)}}}};
  return draft;
}

Stage1Result build_stage1_dataset(const ResponsePool& short_easy, const ResponsePool& long_hard,
                                  const ProblemSet& problems, const Stage1Options& options) {
  if (short_easy.correct_ids.empty() || long_hard.correct_ids.empty()) {
    throw Error("stage-1 build needs non-empty easy and hard pools");
  }
  Stage1Result out;
  out.draft = build_draft_dataset(short_easy, long_hard, problems, options);

  std::vector<SftSample> easy;
  std::vector<SftSample> hard;
  for (const auto& s : out.draft.samples) {
    (s.difficulty == Difficulty::Easy ? easy : hard).push_back(s);
  }
  const std::size_t max_quota = std::min(easy.size(), hard.size());
  if (options.target_size < 0) throw Error("target size must be >= 0");
  const std::size_t quota =
      options.target_size == 0 ? max_quota : static_cast<std::size_t>(options.target_size) / 2;
  if (quota > max_quota || quota == 0) {
    throw Error("cannot build a balanced dataset of " + std::to_string(options.target_size) +
                " samples from " + std::to_string(easy.size()) + " easy and " +
                std::to_string(hard.size()) + " hard; max balanced size " +
                std::to_string(2 * max_quota));
  }

  // Draft order is by problem id, so the shuffle input is canonical.
  SeededRng rng(options.seed);
  rng.shuffle(easy);
  rng.shuffle(hard);
  easy.resize(quota);
  hard.resize(quota);
  auto& samples = out.dataset.samples;
  samples = std::move(easy);
  samples.insert(samples.end(), std::make_move_iterator(hard.begin()),
                 std::make_move_iterator(hard.end()));
  rng.shuffle(samples);

  out.dataset.manifest = {
      {"stage", 1},
      {"seed", options.seed},
      {"target_size", options.target_size},
      {"counts", {{"easy", quota}, {"hard", quota}, {"total", 2 * quota}}},
      {"available", out.draft.manifest["counts"]},
      {"excluded", out.draft.manifest["excluded"]},
      {"sources", out.draft.manifest["sources"]},
      {"hypnosis", {{"easy", options.hypnosis.easy}, {"hard", options.hypnosis.hard}}}};
  return out;
}

}  // namespace cogtune
