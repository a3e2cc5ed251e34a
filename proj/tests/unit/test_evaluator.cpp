#include <gtest/gtest.h>

#include <algorithm>

#include "cogtune/evaluator.hpp"
#include "synthetic.hpp"

using namespace cogtune;

namespace {

Problem problem(const std::string& id, Source src, std::optional<double> level = std::nullopt) {
  Problem p;
  p.id = id;
  p.source = src;
  p.question = "[" + id + "] q";
  p.reference_answer = "5";
  p.raw_level = level;
  p.split = Split::test;
  return p;
}

Trace trace_of(const std::string& raw, bool reached_max = false) {
  auto t = parse_trace(raw);
  t.reached_max_length = reached_max;
  return t;
}

const std::string kLooping = "<think>a\n\nWait, X.\n\nWait, X.\n\nWait, X.";

GatewayConfig gw_config() {
  GatewayConfig c;
  c.endpoints[ModelRole::long_cot] = {"http://mock", "long-cot", "UNSET"};
  return c;
}

}  // namespace

TEST(EvalRequest, TokenLimits) {
  EvalOptions o;
  EXPECT_EQ(max_new_tokens_for(problem("a", Source::aime), o), 16384);
  EXPECT_EQ(max_new_tokens_for(problem("g", Source::gsm8k), o), 8192);
  o.max_new_tokens = 100;
  EXPECT_EQ(max_new_tokens_for(problem("a", Source::aime), o), 100);
  EXPECT_EQ(build_eval_request(problem("a", Source::aime), EvalOptions{}).max_new_tokens, 16384);
}

TEST(EvalRequest, ForcedPrefixes) {
  EvalOptions o;
  EXPECT_EQ(forced_prefix(PromptMode::forced_prefix_matched, Difficulty::Easy, o),
            "This is a simple question, let's think quickly.");
  EXPECT_EQ(forced_prefix(PromptMode::forced_prefix_matched, Difficulty::Hard, o),
            "It seems difficult, let's think thoroughly.");
  EXPECT_EQ(forced_prefix(PromptMode::forced_prefix_unmatched, Difficulty::Easy, o),
            "It seems difficult, let's think thoroughly.");
  EXPECT_FALSE(forced_prefix(PromptMode::standard, Difficulty::Easy, o));
  EXPECT_FALSE(forced_prefix(PromptMode::d_prompt, Difficulty::Easy, o));
}

TEST(EvalRequest, NothinkingPrefixClosesThinkImmediately) {
  EvalOptions o;
  o.mode = PromptMode::nothinking;
  for (auto src : {Source::gsm8k, Source::math, Source::aime}) {
    const auto r = build_eval_request(problem("x", src, 5), o);
    ASSERT_TRUE(r.assistant_prefix);
    EXPECT_NE(r.assistant_prefix->find("<think></think>"), std::string::npos);
  }
}

TEST(EvalRequest, DPromptUsesReminderTemplate) {
  EvalOptions o;
  o.mode = PromptMode::d_prompt;
  const auto r = build_eval_request(problem("g", Source::gsm8k), o);
  EXPECT_NE(r.user_prompt.find("judge how hard"), std::string::npos);
  EXPECT_NE(r.user_prompt.find("[g] q"), std::string::npos);
  EXPECT_EQ(build_eval_request(problem("g", Source::gsm8k), EvalOptions{}).user_prompt.find("judge how hard"),
            std::string::npos);
}

TEST(EvalRequest, MiddleBandIsHardForPrefixes) {
  EvalOptions o;
  o.mode = PromptMode::forced_prefix_matched;
  const auto r = build_eval_request(problem("m", Source::math, 3), o);
  EXPECT_NE(r.assistant_prefix->find("difficult"), std::string::npos);
}

TEST(PromptModeNames, RoundTrip) {
  for (auto m : {PromptMode::standard, PromptMode::d_prompt, PromptMode::nothinking,
                 PromptMode::forced_prefix_matched, PromptMode::forced_prefix_unmatched}) {
    EXPECT_EQ(parse_prompt_mode(to_string(m)), m);
  }
  EXPECT_EQ(to_string(PromptMode::standard), "default");
  EXPECT_THROW(parse_prompt_mode("bogus"), Error);
}

TEST(Cognition, Examples) {
  std::vector<Trace> traces;
  std::vector<Difficulty> gold;
  for (int i = 0; i < 10; ++i) {
    const auto body = i < 9 ? std::string(kEasyHypnosis) : std::string(kHardHypnosis);
    traces.push_back(trace_of("<hypnosis>" + body + "</hypnosis><think>x</think>y"));
    gold.push_back(Difficulty::Easy);
  }
  EXPECT_DOUBLE_EQ(*difficulty_cognition_rate(traces, gold), 0.9);

  const auto tough = trace_of("<hypnosis>This one looks tough.</hypnosis><think>x</think>");
  EXPECT_EQ(difficulty_cognition_rate({tough}, {Difficulty::Hard}), 1.0);
  EXPECT_EQ(difficulty_cognition_rate({trace_of("<think>x</think>")}, {Difficulty::Hard}), 0.0);
  EXPECT_EQ(difficulty_cognition_rate({trace_of("<hypnosis>Hmm</hypnosis><think>x</think>")},
                                      {Difficulty::Easy}),
            0.0);
}

TEST(Cognition, ExcludedLabelsAreIgnored) {
  const auto easy = trace_of("<hypnosis>This is a simple question, let's think quickly.</hypnosis><think>x</think>");
  EXPECT_EQ(difficulty_cognition_rate({easy, easy}, {Difficulty::Easy, Difficulty::Excluded}), 1.0);
  EXPECT_FALSE(difficulty_cognition_rate({easy}, {Difficulty::Excluded}));
  EXPECT_THROW(difficulty_cognition_rate({easy}, {}), std::invalid_argument);
}

TEST(Reflection, CountsAndPartitions) {
  const auto t = trace_of("<think>Plain step.\n\nWait, check.\n\nbut then</think>done");
  const auto s = reflection_stats({t}, {true});
  EXPECT_EQ(s.overall, 2.0);
  EXPECT_EQ(s.correct, 2.0);
  EXPECT_FALSE(s.incorrect);

  const auto u = trace_of("<think>Alternatively, no.</think>");
  const auto both = reflection_stats({t, u}, {true, false});
  EXPECT_EQ(both.overall, 1.5);
  EXPECT_EQ(both.incorrect, 1.0);

  const auto none = reflection_stats({}, {});
  EXPECT_FALSE(none.overall);
}

TEST(LoopStats, Ratios) {
  std::vector<Trace> traces;
  std::vector<bool> correct;
  for (int i = 0; i < 50; ++i) {
    traces.push_back(i == 0 ? trace_of(kLooping, true) : trace_of("<think>a\n\nb</think>5", true));
    correct.push_back(i != 0);
  }
  const auto s = loop_stats(traces, correct);
  EXPECT_DOUBLE_EQ(*s.overall, 0.02);
  EXPECT_EQ(s.incorrect, 1.0);
  EXPECT_EQ(s.correct, 0.0);

  correct.assign(50, true);
  traces[0] = trace_of("<think>a</think>5");
  const auto z = loop_stats(traces, correct);
  EXPECT_EQ(z.overall, 0.0);
  EXPECT_FALSE(z.incorrect);
}

TEST(Histogram, Buckets) {
  const auto h = length_histogram({0, 511, 512, 1500}, {true, false, true, true}, 512);
  ASSERT_EQ(h.size(), 3u);
  EXPECT_EQ(h[0], (HistogramBucket{0, 512, 1, 1}));
  EXPECT_EQ(h[1], (HistogramBucket{512, 1024, 1, 0}));
  EXPECT_EQ(h[2], (HistogramBucket{1024, 1536, 1, 0}));
  EXPECT_THROW(length_histogram({1}, {true}, 0), std::invalid_argument);
  EXPECT_TRUE(length_histogram({}, {}, 512).empty());
}

TEST(ApproxCounter, WordsAndPunctuation) {
  ApproxTokenCounter c;
  EXPECT_EQ(c.count("Hello, world!"), 4);
  EXPECT_EQ(c.count(""), 0);
  EXPECT_EQ(c.count("  a  b\n"), 2);
}

TEST(EvaluateRun, EmptySetIsAnError) {
  ModelGateway gw(gw_config(), std::make_shared<MockTransport>());
  EXPECT_THROW(evaluate_run(ProblemSet{}, gw, EvalOptions{}), std::invalid_argument);
}

TEST(EvaluateRun, GradesCountsAndFailures) {
  ProblemSet ps;
  ps.add(problem("a", Source::gsm8k));
  ps.add(problem("b", Source::gsm8k));
  ps.add(problem("c", Source::math, 5));
  ps.add(problem("d", Source::math, 5));
  auto mock = std::make_shared<MockTransport>(std::vector<MockFixture>{
      {"", "[a]", "<think>x</think>\\boxed{5}", "stop", 10},
      {"", "[b]", "<think>Wait, x.</think>\\boxed{4}", "stop", 20},
      {"", "[c]", kLooping, "length", 8192},
      {"", "[d]", "", "stop", std::nullopt, 400}});
  ModelGateway gw(gw_config(), mock);
  EvalOptions o;
  o.run_id = "r1";
  const auto run = evaluate_run(ps, gw, o);
  ASSERT_EQ(run.records.size(), 4u);
  EXPECT_TRUE(run.records[3].failed());
  const auto& r = run.report;
  EXPECT_EQ(r.n_problems, 4u);
  EXPECT_EQ(r.n_scored, 3u);
  EXPECT_EQ(r.n_correct, 1u);
  EXPECT_EQ(r.failed_ids, (std::vector<std::string>{"d"}));
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0 / 3.0);
  EXPECT_EQ(r.token_counter, "provider");
  EXPECT_DOUBLE_EQ(r.mean_tokens, (10.0 + 20.0 + 8192.0) / 3.0);
  EXPECT_TRUE(run.records[2].looped);
  EXPECT_DOUBLE_EQ(*r.loop_ratio.overall, 1.0 / 3.0);
  EXPECT_EQ(r.loop_ratio.correct, 0.0);
  EXPECT_EQ(r.loop_ratio.incorrect, 0.5);
  EXPECT_EQ(r.problem_set_sha256, problem_set_digest(ps));
}

TEST(EvaluateRun, FallsBackToApproxCounterWhenUsageMissing) {
  ProblemSet ps;
  ps.add(problem("a", Source::gsm8k));
  ps.add(problem("b", Source::gsm8k));
  auto mock = std::make_shared<MockTransport>(std::vector<MockFixture>{
      {"", "[a]", "<think>x</think>\\boxed{5}", "stop", 10},
      {"", "[b]", "one two three", "stop", std::nullopt}});
  ModelGateway gw(gw_config(), mock);
  const auto run = evaluate_run(ps, gw, EvalOptions{});
  EXPECT_EQ(run.report.token_counter, "approx_whitespace_punct");
  EXPECT_EQ(run.records[1].tokens, 3);
}

TEST(EvaluateRun, ForcedPrefixIsPartOfResponse) {
  ProblemSet ps;
  ps.add(problem("a", Source::gsm8k));
  auto mock = std::make_shared<MockTransport>(
      std::vector<MockFixture>{{"", "[a]", "<think>x</think>\\boxed{5}", "stop", 10}});
  ModelGateway gw(gw_config(), mock);
  EvalOptions o;
  o.mode = PromptMode::forced_prefix_matched;
  const auto run = evaluate_run(ps, gw, o);
  EXPECT_EQ(run.records[0].response,
            "This is a simple question, let's think quickly.<think>x</think>\\boxed{5}");
  EXPECT_TRUE(run.records[0].correct);
  EXPECT_EQ(mock->requests().at(0)["messages"].back()["role"], "assistant");
}

TEST(Summarize, MixedCountersAreRejected) {
  EvalRecord a, b;
  a.problem_id = "a";
  a.token_counter = "provider";
  b.problem_id = "b";
  b.token_counter = "approx_whitespace_punct";
  EXPECT_THROW(summarize({a, b}, EvalOptions{}), Error);
}

// Property: partitions cover the run and aggregates ignore record order.
TEST(Summarize, PartitionAndOrderInvariance) {
  SeededRng rng(3);
  fixtures::RandomTraceGen gen(3);
  for (int round = 0; round < 50; ++round) {
    std::vector<EvalRecord> recs;
    const auto n = 1 + rng.below(30);
    for (std::uint64_t i = 0; i < n; ++i) {
      EvalRecord r;
      r.problem_id = "p" + std::to_string(i);
      r.trace = parse_trace(gen.next());
      r.trace.reached_max_length = rng.below(2) == 0;
      r.trace.latency_seconds = static_cast<double>(rng.below(100));
      r.correct = rng.below(2) == 0;
      r.tokens = static_cast<long>(rng.below(5000));
      r.token_counter = "provider";
      r.cognition_gold = rng.below(2) == 0 ? Difficulty::Easy : Difficulty::Hard;
      recs.push_back(r);
    }
    const auto a = summarize(recs, EvalOptions{});
    std::reverse(recs.begin(), recs.end());
    rng.shuffle(recs);
    const auto b = summarize(recs, EvalOptions{});
    EXPECT_EQ(a.mean_tokens, b.mean_tokens);
    EXPECT_EQ(a.accuracy, b.accuracy);
    EXPECT_EQ(a.length_histogram, b.length_histogram);
    EXPECT_NEAR(a.accuracy * static_cast<double>(a.n_scored) +
                    (1 - a.accuracy) * static_cast<double>(a.n_scored),
                static_cast<double>(a.n_scored), 1e-9);
    EXPECT_GE(a.accuracy, 0.0);
    EXPECT_LE(a.accuracy, 1.0);
    if (a.reflection_stats.correct && a.reflection_stats.incorrect) {
      const double nc = static_cast<double>(a.n_correct);
      const double ni = static_cast<double>(a.n_scored - a.n_correct);
      EXPECT_NEAR(*a.reflection_stats.overall * static_cast<double>(a.n_scored),
                  *a.reflection_stats.correct * nc + *a.reflection_stats.incorrect * ni, 1e-6);
    }
    std::size_t hist_total = 0;
    for (const auto& h : a.length_histogram) hist_total += h.correct + h.incorrect;
    EXPECT_EQ(hist_total, a.n_scored);
    for (const auto& v : {a.loop_ratio.overall, a.loop_ratio.correct, a.loop_ratio.incorrect}) {
      if (v) {
        EXPECT_GE(*v, 0.0);
        EXPECT_LE(*v, 1.0);
      }
    }
  }
}

TEST(ReportJson, RoundTrip) {
  EvalReport r;
  r.run_id = "x";
  r.prompt_mode = PromptMode::nothinking;
  r.n_problems = 3;
  r.accuracy = 0.5;
  r.cognition_rate = std::nullopt;
  r.reflection_stats = {1.0, std::nullopt, 2.0};
  r.length_histogram = {{0, 512, 1, 2}};
  r.failed_ids = {"z"};
  EXPECT_EQ(eval_report_from_json(to_json(r)), r);
  EXPECT_EQ(to_json(r)["prompt_mode"], "nothinking");
}
