#include "cogtune/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "cogtune/config.hpp"
#include "cogtune/corpus.hpp"
#include "cogtune/dataset.hpp"
#include "cogtune/evaluator.hpp"
#include "cogtune/report.hpp"
#include "cogtune/stage1.hpp"
#include "cogtune/stage2.hpp"
#include "cogtune/util.hpp"

namespace cogtune::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::string cache_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> parallelism;
  std::string mock;
};

struct Context {
  AppConfig config;
  std::ostream& out;
  std::ostream& err;
  const Hooks& hooks;

  std::shared_ptr<Transport> transport() const {
    if (hooks.transport) return hooks.transport;
    return std::make_shared<HttpTransport>();
  }

  ModelGateway gateway() const { return ModelGateway(config.gateway, transport(), hooks.sleeper); }
};

AppConfig resolve_config(const Globals& g) {
  AppConfig c = g.config.empty() ? default_config() : load_config(g.config);
  if (!g.cache_dir.empty()) c.gateway.cache_dir = g.cache_dir;
  if (g.seed) c.seed = *g.seed;
  if (g.parallelism) {
    if (*g.parallelism < 1) throw Error("--parallelism must be >= 1");
    c.parallelism = *g.parallelism;
  }
  return c;
}

ProblemSet load_problems(const fs::path& path, std::ostream& err) {
  auto ingest = ingest_dataset(path, format_from_path(path));
  for (const auto& d : ingest.diagnostics) err << "warning: " << d << "\n";
  for (const auto& w : ingest.warnings) err << "warning: " << w << "\n";
  return std::move(ingest.problems);
}

Stage1Options stage1_options(const AppConfig& c) {
  Stage1Options o;
  o.target_size = c.stage1_target_size;
  o.seed = c.seed;
  o.hypnosis = c.hypnosis;
  o.templates = c.templates;
  o.chunker = c.chunker;
  return o;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string input;
  std::string format;
  std::string out;
};

int cmd_ingest(const Context& ctx, const IngestArgs& a) {
  InputFormat format = format_from_path(a.input);
  if (a.format == "csv") {
    format = InputFormat::csv;
  } else if (a.format == "jsonl") {
    format = InputFormat::jsonl;
  } else if (!a.format.empty()) {
    throw Error("unknown input format '" + a.format + "'");
  }
  auto result = ingest_dataset(a.input, format);
  for (const auto& d : result.diagnostics) ctx.err << "skipped: " << d << "\n";
  for (const auto& w : result.warnings) ctx.err << "warning: " << w << "\n";
  write_problems_jsonl(result.problems, a.out);
  ctx.out << "ingested " << result.problems.size() << " problems (" << result.skipped
          << " skipped) -> " << a.out << "\n";
  return result.skipped > 0 ? kExitPartial : kExitOk;
}

struct CollectArgs {
  std::string problems;
  std::string out_dir = "out";
};

int cmd_collect(const Context& ctx, const CollectArgs& a) {
  const auto problems = load_problems(a.problems, ctx.err);
  auto [easy, hard] = split_training_problems(problems);
  if (easy.empty() && hard.empty()) throw Error("no Easy or Hard training problems in " + a.problems);
  auto gateway = ctx.gateway();
  CollectOptions o;
  o.templates = ctx.config.templates;
  o.chunker = ctx.config.chunker;
  o.parallelism = ctx.config.parallelism;
  o.max_new_tokens = ctx.config.generation_max_new_tokens;
  const auto pools = build_pools(easy, hard, gateway, o);

  const fs::path dir = fs::path(a.out_dir) / "pools";
  write_pool(pools.short_easy, dir / "pool_short_easy.jsonl");
  write_pool(pools.long_easy, dir / "pool_long_easy.jsonl");
  write_pool(pools.long_hard, dir / "pool_long_hard.jsonl");

  json manifest = {{"easy_problems", easy.size()}, {"hard_problems", hard.size()}};
  std::size_t failures = 0;
  for (const auto* p : {&pools.short_easy, &pools.long_easy, &pools.long_hard}) {
    failures += p->failures.size();
  }
  auto pool_entry = [](const ResponsePool& p) {
    return json{{"responses", p.entries.size()},
                {"correct", p.correct_ids.size()},
                {"failures", p.failures.size()},
                {"sha256", pool_digest(p)}};
  };
  manifest["pools"] = {{"short_easy", pool_entry(pools.short_easy)},
                       {"long_easy", pool_entry(pools.long_easy)},
                       {"long_hard", pool_entry(pools.long_hard)}};
  if (!pools.long_easy.correct_ids.empty()) {
    const double overlap = overlap_ratio(pools.short_easy, pools.long_easy);
    manifest["overlap_ratio"] = overlap;
    ctx.out << "overlap ratio (short vs long on Easy): " << overlap << "\n";
  } else {
    manifest["overlap_ratio"] = nullptr;
  }
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  ctx.out << "pools written to " << dir.string() << " (" << failures << " failed requests)\n";
  return failures > 0 ? kExitPartial : kExitOk;
}

struct Stage1Args {
  std::string problems;
  std::string pools;
  std::string out_dir = "out";
  std::optional<int> target;
};

int cmd_build_stage1(Context& ctx, const Stage1Args& a) {
  const auto problems = load_problems(a.problems, ctx.err);
  if (a.target) ctx.config.stage1_target_size = *a.target;
  const fs::path pools = a.pools.empty() ? fs::path(a.out_dir) / "pools" : fs::path(a.pools);
  const auto short_easy = read_pool(pools / "pool_short_easy.jsonl", problems, ctx.config.chunker);
  const auto long_hard = read_pool(pools / "pool_long_hard.jsonl", problems, ctx.config.chunker);
  auto result = build_stage1_dataset(short_easy, long_hard, problems, stage1_options(ctx.config));
  const fs::path dir = fs::path(a.out_dir) / "stage1";
  write_dataset(result.draft, dir / "draft", "draft.jsonl", false);
  write_dataset(result.dataset, dir, "sft_stage1.jsonl", false);
  ctx.out << "stage-1 dataset: " << result.dataset.samples.size() << " samples (draft "
          << result.draft.samples.size() << ") -> " << (dir / "sft_stage1.jsonl").string() << "\n";
  return kExitOk;
}

struct Stage2Args {
  std::string problems;
  std::string stage1;
  std::string out_dir = "out";
  std::string determinator;
};

int cmd_build_stage2(Context& ctx, const Stage2Args& a) {
  const auto problems = load_problems(a.problems, ctx.err);
  const fs::path stage1 =
      a.stage1.empty() ? fs::path(a.out_dir) / "stage1" / "sft_stage1.jsonl" : fs::path(a.stage1);
  const auto dataset = read_dataset(stage1, problems);
  if (!a.determinator.empty()) ctx.config.determinator = parse_determinator_mode(a.determinator);

  Stage2Options o;
  o.seed = ctx.config.seed;
  o.judge_mode = ctx.config.determinator;
  o.repeats = ctx.config.stage2_repeats;
  o.redundancy_fraction = ctx.config.stage2_redundancy;
  o.loop_fraction = ctx.config.stage2_loop;
  o.transform = {ctx.config.hypnosis, ctx.config.templates, ctx.config.chunker};
  o.judge.max_new_tokens = ctx.config.judge_max_new_tokens;
  o.judge.retries = ctx.config.judge_retries;
  o.judge.parallelism = ctx.config.parallelism;

  std::optional<ModelGateway> gateway;
  if (o.judge_mode == DeterminatorMode::llm_judge) {
    gateway.emplace(ctx.config.gateway, ctx.transport(), ctx.hooks.sleeper);
    o.judge.gateway = &*gateway;
  }
  auto result = compose_stage2(dataset, o);
  for (const auto& w : result.warnings) ctx.err << "warning: " << w << "\n";
  const fs::path dir = fs::path(a.out_dir) / "stage2";
  write_dataset(result.dataset, dir, "sft_stage2.jsonl", true);
  const auto& counts = result.dataset.manifest["counts"];
  ctx.out << "stage-2 dataset: " << counts["total"] << " samples (easy " << counts["easy"]
          << ", hard untouched " << counts["hard_untouched"] << ", redundancy "
          << counts["redundancy_truncated"] << ", loop " << counts["loop_simulated"] << ") -> "
          << (dir / "sft_stage2.jsonl").string() << "\n";
  return result.warnings.empty() ? kExitOk : kExitPartial;
}

struct EvaluateArgs {
  std::string problems;
  std::string mode = "default";
  std::string run_id;
  std::string out_dir = "out";
  std::string role = "long_cot";
  std::string split = "test";
  std::optional<int> max_new_tokens;
};

int cmd_evaluate(const Context& ctx, const EvaluateArgs& a) {
  const auto all = load_problems(a.problems, ctx.err);
  ProblemSet problems;
  for (const auto& p : all) {
    if (a.split == "all" || to_string(p.split) == a.split) problems.add(p);
  }
  if (problems.empty()) throw Error("no problems in split '" + a.split + "'");

  EvalOptions o;
  o.mode = parse_prompt_mode(a.mode);
  o.run_id = a.run_id.empty() ? std::string(to_string(o.mode)) : a.run_id;
  o.model_role = parse_model_role(a.role);
  o.max_new_tokens = a.max_new_tokens;
  o.default_max_new_tokens = ctx.config.eval_max_new_tokens;
  o.aime_max_new_tokens = ctx.config.eval_aime_max_new_tokens;
  o.templates = ctx.config.templates;
  o.hypnosis = ctx.config.hypnosis;
  o.chunker = ctx.config.chunker;
  o.parallelism = ctx.config.parallelism;
  o.histogram_bucket = ctx.config.histogram_bucket;

  auto gateway = ctx.gateway();
  const auto run = evaluate_run(problems, gateway, o);
  const fs::path dir = fs::path(a.out_dir) / "runs" / o.run_id;
  write_traces(run.records, dir / "traces.jsonl");
  write_file_atomic(dir / "report.json", to_json(run.report).dump(2) + "\n");
  for (const auto& id : run.report.failed_ids) ctx.err << "failed: " << id << "\n";
  ctx.out << summary_table(ReportBundle{{run.report}, {}});
  return run.report.failed_ids.empty() ? kExitOk : kExitPartial;
}

EvalReport load_run_report(const fs::path& path) {
  return eval_report_from_json(json::parse(read_file(path)));
}

struct CompareArgs {
  std::string base;
  std::string treated;
};

int cmd_compare(const Context& ctx, const CompareArgs& a) {
  const auto base = load_run_report(a.base);
  const auto treated = load_run_report(a.treated);
  const auto c = compare_runs(base, treated);
  ctx.out << summary_table(ReportBundle{{base, treated}, {c}});
  return kExitOk;
}

struct ReportArgs {
  std::vector<std::string> runs;
  std::string baseline;
  std::string out_dir = "out/report";
};

int cmd_report(const Context& ctx, const ReportArgs& a) {
  ReportBundle b;
  for (const auto& r : a.runs) b.runs.push_back(load_run_report(r));
  if (b.runs.empty()) throw Error("report needs at least one run");
  const EvalReport* base = &b.runs.front();
  if (!a.baseline.empty()) {
    base = nullptr;
    for (const auto& r : b.runs) {
      if (r.run_id == a.baseline) base = &r;
    }
    if (base == nullptr) throw Error("baseline run '" + a.baseline + "' not among the runs");
  }
  for (const auto& r : b.runs) {
    if (&r != base) b.comparisons.push_back(compare_runs(*base, r));
  }
  emit_report(b, a.out_dir);
  ctx.out << summary_table(b);
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const Hooks& hooks) {
  CLI::App app{"Difficulty- and redundancy-hypnosis dataset builder and evaluation harness", "cogtune"};
  app.fallthrough();
  app.require_subcommand(1);

  Globals g;
  app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--cache-dir", g.cache_dir, "Response cache directory");
  app.add_option("--seed", g.seed, "Seed for every seeded choice");
  app.add_option("--parallelism", g.parallelism, "Requests in flight");
  app.add_option("--mock", g.mock, "Serve generations from a fixtures JSONL file")
      ->check(CLI::ExistingFile);

  IngestArgs ingest;
  auto* s_ingest = app.add_subcommand("ingest", "Normalize a benchmark file into problems JSONL");
  s_ingest->add_option("--input", ingest.input)->required()->check(CLI::ExistingFile);
  s_ingest->add_option("--format", ingest.format, "jsonl or csv (default: from extension)");
  s_ingest->add_option("--out", ingest.out)->required();

  CollectArgs collect;
  auto* s_collect = app.add_subcommand("collect", "Query models and build the response pools");
  s_collect->add_option("--problems", collect.problems)->required()->check(CLI::ExistingFile);
  s_collect->add_option("--out-dir", collect.out_dir, "Output root")->capture_default_str();

  Stage1Args stage1;
  auto* s_stage1 = app.add_subcommand("build-stage1", "Build the difficulty-hypnosis dataset");
  s_stage1->add_option("--problems", stage1.problems)->required()->check(CLI::ExistingFile);
  s_stage1->add_option("--pools", stage1.pools, "Pool directory (default: <out-dir>/pools)");
  s_stage1->add_option("--out-dir", stage1.out_dir, "Output root")->capture_default_str();
  s_stage1->add_option("--target", stage1.target, "Total size; 0 for the largest balanced size");

  Stage2Args stage2;
  auto* s_stage2 = app.add_subcommand("build-stage2", "Build the redundancy-hypnosis dataset");
  s_stage2->add_option("--problems", stage2.problems)->required()->check(CLI::ExistingFile);
  s_stage2->add_option("--stage1", stage2.stage1, "Stage-1 JSONL (default: <out-dir>/stage1)");
  s_stage2->add_option("--out-dir", stage2.out_dir, "Output root")->capture_default_str();
  s_stage2->add_option("--determinator", stage2.determinator, "llm_judge or rule_based");

  EvaluateArgs evaluate;
  auto* s_eval = app.add_subcommand("evaluate", "Run a benchmark under one prompt mode");
  s_eval->add_option("--problems", evaluate.problems)->required()->check(CLI::ExistingFile);
  s_eval->add_option("--mode", evaluate.mode, "default, d_prompt, nothinking, forced_prefix_matched, forced_prefix_unmatched")->capture_default_str();
  s_eval->add_option("--run-id", evaluate.run_id, "Run name (default: the mode)");
  s_eval->add_option("--out-dir", evaluate.out_dir, "Output root")->capture_default_str();
  s_eval->add_option("--role", evaluate.role, "Model role to evaluate")->capture_default_str();
  s_eval->add_option("--split", evaluate.split, "train, test or all")->capture_default_str();
  s_eval->add_option("--max-new-tokens", evaluate.max_new_tokens, "Override the per-source limit");

  CompareArgs compare;
  auto* s_compare = app.add_subcommand("compare", "Length reduction and speedup between two runs");
  s_compare->add_option("--base", compare.base)->required()->check(CLI::ExistingFile);
  s_compare->add_option("--treated", compare.treated)->required()->check(CLI::ExistingFile);

  ReportArgs report;
  auto* s_report = app.add_subcommand("report", "Emit report.json/csv, histogram.csv and a summary");
  s_report->add_option("--runs", report.runs, "Run report.json files")->required()->check(CLI::ExistingFile);
  s_report->add_option("--baseline", report.baseline, "Run id to compare against (default: first)");
  s_report->add_option("--out-dir", report.out_dir, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitFatal;
  }

  try {
    Hooks effective = hooks;
    if (!g.mock.empty() && !effective.transport) effective.transport = MockTransport::from_file(g.mock);
    Context ctx{resolve_config(g), out, err, effective};
    if (*s_ingest) return cmd_ingest(ctx, ingest);
    if (*s_collect) return cmd_collect(ctx, collect);
    if (*s_stage1) return cmd_build_stage1(ctx, stage1);
    if (*s_stage2) return cmd_build_stage2(ctx, stage2);
    if (*s_eval) return cmd_evaluate(ctx, evaluate);
    if (*s_compare) return cmd_compare(ctx, compare);
    if (*s_report) return cmd_report(ctx, report);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitFatal;
}

}  // namespace cogtune::cli
