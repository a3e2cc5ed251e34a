#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cogtune/evaluator.hpp"

namespace cogtune {

struct Reduction {
  double len_reduction = 0.0;  // 1 - treated/base tokens
  double speedup = 0.0;        // base/treated latency
  double acc_gain = 0.0;       // treated - base accuracy

  bool operator==(const Reduction&) const = default;
};

/// Throws on zero base length or latency, zero treated latency, or reports
/// over different problem sets.
Reduction compute_reduction_speedup(const EvalReport& base, const EvalReport& treated);

struct Comparison {
  std::string base_run;
  std::string treated_run;
  double base_accuracy = 0.0;
  double treated_accuracy = 0.0;
  double base_tokens = 0.0;
  double treated_tokens = 0.0;
  double base_latency = 0.0;
  double treated_latency = 0.0;
  Reduction delta;

  bool operator==(const Comparison&) const = default;
};

Comparison compare_runs(const EvalReport& base, const EvalReport& treated);

/// "-74.0%": signed change in length, one decimal.
std::string format_length_change(double len_reduction);
/// "5.23x"
std::string format_speedup(double speedup);
/// Rounds to `digits` significant figures.
double round_sig(double value, int digits);

struct ReportBundle {
  std::vector<EvalReport> runs;
  std::vector<Comparison> comparisons;

  bool operator==(const ReportBundle&) const = default;
};

nlohmann::json to_json(const Comparison& c);
Comparison comparison_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ReportBundle& b);
ReportBundle report_bundle_from_json(const nlohmann::json& j);

std::string report_csv(const ReportBundle& b);
std::string histogram_csv(const ReportBundle& b);
std::string summary_table(const ReportBundle& b);

/// Writes report.json, report.csv, histogram.csv and summary.txt.
void emit_report(const ReportBundle& b, const std::filesystem::path& out_dir);

ReportBundle read_report(const std::filesystem::path& report_json);

}  // namespace cogtune
