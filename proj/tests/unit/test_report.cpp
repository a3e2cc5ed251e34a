#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "cogtune/report.hpp"
#include "synthetic.hpp"

using namespace cogtune;

namespace {

EvalReport run(const std::string& id, double acc, double tokens, double latency,
               const std::string& digest = "d") {
  EvalReport r;
  r.run_id = id;
  r.accuracy = acc;
  r.mean_tokens = tokens;
  r.mean_latency_seconds = latency;
  r.problem_set_sha256 = digest;
  r.n_problems = r.n_scored = 10;
  r.token_counter = "provider";
  return r;
}

// Published benchmark rows: base and treated raw cells plus the printed
// length change (percent) and speedup.
struct Row {
  const char* name;
  double base_len, base_lat, len, lat, printed_change, printed_speedup;
};

const Row kRows[] = {
    {"7b-gsm-dprompt", 1057.5, 20.29, 906.2, 16.38, -14.3, 1.24},
    {"7b-gsm-nothinking", 1057.5, 20.29, 243.9, 3.34, -76.9, 6.07},
    {"7b-gsm-no-dh", 1057.5, 20.29, 502.9, 7.80, -47.4, 2.60},
    {"7b-gsm-no-rh", 1057.5, 20.29, 397.0, 5.99, -62.4, 3.39},
    {"7b-gsm-full", 1057.5, 20.29, 275.0, 3.88, -74.0, 5.23},
    {"7b-math-dprompt", 2857.1, 87.69, 2726.1, 81.54, -4.6, 1.08},
    {"7b-math-nothinking", 2857.1, 87.69, 699.0, 11.81, -75.5, 6.43},
    {"7b-math-no-dh", 2857.1, 87.69, 1906.3, 46.68, -33.2, 1.88},
    {"7b-math-no-rh", 2857.1, 87.69, 2265.0, 60.22, -20.7, 1.46},
    {"7b-math-full", 2857.1, 87.69, 1772.0, 41.65, -38.0, 2.11},
    {"14b-gsm-dprompt", 584.2, 9.38, 606.6, 9.95, 3.9, 0.94},
    {"14b-gsm-nothinking", 584.2, 9.38, 205.7, 3.06, -64.9, 3.07},
    {"14b-gsm-no-dh", 584.2, 9.38, 337.8, 4.82, -42.2, 1.95},
    {"14b-gsm-no-rh", 584.2, 9.38, 299.1, 4.34, -51.2, 2.16},
    {"14b-gsm-full", 584.2, 9.38, 245.5, 3.38, -58.1, 2.78},
    {"14b-math-dprompt", 2306.0, 62.65, 2297.9, 62.60, -0.3, 1.01},
    {"14b-math-nothinking", 2306.0, 62.65, 611.8, 10.05, -73.5, 6.23},
    {"14b-math-no-dh", 2306.0, 62.65, 1549.4, 33.93, -32.8, 1.85},
    {"14b-math-no-rh", 2306.0, 62.65, 1706.4, 39.83, -26.0, 1.57},
    {"14b-math-full", 2306.0, 62.65, 1343.0, 27.84, -41.8, 2.25},
    {"32b-gsm-dprompt", 717.2, 12.14, 662.7, 11.12, -7.6, 1.09},
    {"32b-gsm-nothinking", 717.2, 12.14, 228.1, 3.25, -68.2, 3.74},
    {"32b-gsm-no-dh", 717.2, 12.14, 360.5, 5.47, -49.7, 2.22},
    {"32b-gsm-no-rh", 717.2, 12.14, 322.6, 4.84, -55.0, 2.51},
    {"32b-gsm-full", 717.2, 12.14, 263.1, 3.51, -63.3, 3.46},
    {"32b-math-dprompt", 2356.9, 63.02, 2197.9, 57.11, -6.8, 1.10},
    {"32b-math-nothinking", 2356.9, 63.02, 659.1, 10.98, -72.0, 5.74},
    {"32b-math-no-dh", 2356.9, 63.02, 1863.4, 45.18, -20.9, 1.39},
    {"32b-math-no-rh", 2356.9, 63.02, 2113.7, 53.99, -10.3, 1.17},
    {"32b-math-full", 2356.9, 63.02, 1732.8, 40.13, -26.5, 1.57},
};

// Printed cells that no rounding of their own raw cells can produce.
const std::set<std::string> kInconsistentLength = {"7b-gsm-no-dh", "14b-gsm-no-rh"};
const std::set<std::string> kInconsistentSpeedup = {"7b-math-nothinking"};

}  // namespace

TEST(Reduction, HeadlineRows) {
  const auto r = compute_reduction_speedup(run("b", 0.9151, 1057.5, 20.29), run("t", 0.9287, 275.0, 3.88));
  EXPECT_EQ(format_length_change(r.len_reduction), "-74.0%");
  EXPECT_EQ(format_speedup(r.speedup), "5.23x");
  EXPECT_NEAR(r.acc_gain, 0.0136, 1e-12);
  EXPECT_EQ(round_sig(r.len_reduction, 3), 0.740);

  const auto m = compute_reduction_speedup(run("b", 0, 2857.1, 87.69), run("t", 0, 1772.0, 41.65));
  EXPECT_EQ(format_length_change(m.len_reduction), "-38.0%");
  EXPECT_EQ(format_speedup(m.speedup), "2.11x");

  const auto big = compute_reduction_speedup(run("b", 0, 717.2, 12.14), run("t", 0, 263.1, 3.51));
  EXPECT_EQ(format_length_change(big.len_reduction), "-63.3%");
  EXPECT_EQ(format_speedup(big.speedup), "3.46x");

  const auto d = compute_reduction_speedup(run("b", 0, 584.2, 9.38), run("t", 0, 606.6, 9.95));
  EXPECT_EQ(format_speedup(d.speedup), "0.94x");
  EXPECT_LT(d.len_reduction, 0);
}

// Every printed cell is reproduced within the slack left by rounding of the
// raw cells (0.2 points of length change, 0.01 of speedup), except the three
// cells listed as inconsistent.
TEST(Reduction, PublishedRowsWithinPrintedPrecision) {
  for (const auto& row : kRows) {
    const auto r = compute_reduction_speedup(run("b", 0, row.base_len, row.base_lat),
                                             run("t", 0, row.len, row.lat));
    const double change = -100.0 * r.len_reduction;
    const bool length_ok = std::abs(change - row.printed_change) <= 0.2 + 1e-9;
    const bool speed_ok = std::abs(r.speedup - row.printed_speedup) <= 0.01 + 1e-9;
    EXPECT_EQ(length_ok, kInconsistentLength.count(row.name) == 0)
        << row.name << ": computed " << change << "% vs printed " << row.printed_change;
    EXPECT_EQ(speed_ok, kInconsistentSpeedup.count(row.name) == 0)
        << row.name << ": computed " << r.speedup << "x vs printed " << row.printed_speedup;
  }
}

TEST(Reduction, Identity) {
  const auto a = run("a", 0.5, 100, 2);
  const auto r = compute_reduction_speedup(a, a);
  EXPECT_EQ(r.len_reduction, 0.0);
  EXPECT_EQ(r.speedup, 1.0);
  EXPECT_EQ(r.acc_gain, 0.0);
}

TEST(Reduction, Guards) {
  EXPECT_THROW(compute_reduction_speedup(run("a", 0, 0, 2), run("b", 0, 10, 2)), Error);
  EXPECT_THROW(compute_reduction_speedup(run("a", 0, 10, 0), run("b", 0, 10, 2)), Error);
  EXPECT_THROW(compute_reduction_speedup(run("a", 0, 10, 2), run("b", 0, 10, 0)), Error);
  EXPECT_THROW(compute_reduction_speedup(run("a", 0, 10, 2, "x"), run("b", 0, 10, 2, "y")), Error);
}

TEST(Format, Strings) {
  EXPECT_EQ(format_length_change(0.740), "-74.0%");
  EXPECT_EQ(format_length_change(-0.039), "+3.9%");
  EXPECT_EQ(format_length_change(0.0), "+0.0%");
  EXPECT_EQ(format_speedup(5.2294), "5.23x");
  EXPECT_EQ(round_sig(0.123456, 3), 0.123);
  EXPECT_EQ(round_sig(1234.5, 2), 1200.0);
  EXPECT_EQ(round_sig(0.0, 3), 0.0);
}

TEST(Compare, CarriesRawCells) {
  const auto c = compare_runs(run("base", 0.9, 1000, 10), run("ours", 0.95, 250, 2.5));
  EXPECT_EQ(c.base_run, "base");
  EXPECT_EQ(c.treated_run, "ours");
  EXPECT_EQ(c.base_tokens, 1000);
  EXPECT_EQ(c.treated_latency, 2.5);
  EXPECT_EQ(c.delta.len_reduction, 0.75);
  EXPECT_EQ(c.delta.speedup, 4.0);
  EXPECT_EQ(comparison_from_json(to_json(c)), c);
}

TEST(Emit, RoundTripWithComparison) {
  ReportBundle b;
  auto base = run("base", 0.9, 1000, 10);
  base.length_histogram = {{0, 512, 3, 1}, {512, 1024, 5, 1}};
  base.reflection_stats = {2.5, 2.0, std::nullopt};
  base.cognition_rate = 0.8;
  auto ours = run("ours", 0.95, 250, 2.5);
  ours.length_histogram = {{0, 512, 9, 1}};
  b.runs = {base, ours};
  b.comparisons = {compare_runs(base, ours)};
  const auto dir = fixtures::temp_dir("report-emit");
  emit_report(b, dir);
  for (const auto* f : {"report.json", "report.csv", "histogram.csv", "summary.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  EXPECT_EQ(read_report(dir / "report.json"), b);

  const auto csv = read_file(dir / "report.csv");
  EXPECT_NE(csv.find("-75.0%"), std::string::npos);
  EXPECT_NE(csv.find("4.00x"), std::string::npos);
  const auto hist = read_file(dir / "histogram.csv");
  EXPECT_NE(hist.find("base,512,1024,5,1"), std::string::npos) << hist;
  EXPECT_NE(read_file(dir / "summary.txt").find("ours"), std::string::npos);
}

TEST(Emit, SingleRunHasNoComparisonBlock) {
  ReportBundle b;
  b.runs = {run("only", 0.5, 100, 1)};
  EXPECT_FALSE(to_json(b).contains("comparisons"));
  EXPECT_EQ(report_bundle_from_json(to_json(b)), b);
}

TEST(Emit, UnwritableDirectoryIsFatal) {
  ReportBundle b;
  b.runs = {run("only", 0.5, 100, 1)};
  const auto dir = fixtures::temp_dir("report-blocked");
  write_file_atomic(dir / "file", "x");
  EXPECT_ANY_THROW(emit_report(b, dir / "file" / "sub"));
}
