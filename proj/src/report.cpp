#include "cogtune/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "cogtune/util.hpp"

namespace cogtune {

using nlohmann::json;

Reduction compute_reduction_speedup(const EvalReport& base, const EvalReport& treated) {
  if (!base.problem_set_sha256.empty() && !treated.problem_set_sha256.empty() &&
      base.problem_set_sha256 != treated.problem_set_sha256) {
    throw Error("runs '" + base.run_id + "' and '" + treated.run_id +
                "' were evaluated on different problem sets");
  }
  if (base.mean_tokens == 0.0) throw Error("base run '" + base.run_id + "' has zero mean length");
  if (base.mean_latency_seconds == 0.0) {
    throw Error("base run '" + base.run_id + "' has zero mean latency");
  }
  if (treated.mean_latency_seconds == 0.0) {
    throw Error("treated run '" + treated.run_id + "' has zero mean latency");
  }
  return {1.0 - treated.mean_tokens / base.mean_tokens,
          base.mean_latency_seconds / treated.mean_latency_seconds,
          treated.accuracy - base.accuracy};
}

Comparison compare_runs(const EvalReport& base, const EvalReport& treated) {
  Comparison c;
  c.base_run = base.run_id;
  c.treated_run = treated.run_id;
  c.base_accuracy = base.accuracy;
  c.treated_accuracy = treated.accuracy;
  c.base_tokens = base.mean_tokens;
  c.treated_tokens = treated.mean_tokens;
  c.base_latency = base.mean_latency_seconds;
  c.treated_latency = treated.mean_latency_seconds;
  c.delta = compute_reduction_speedup(base, treated);
  return c;
}

double round_sig(double value, int digits) {
  if (value == 0.0 || !std::isfinite(value)) return value;
  const double magnitude = std::floor(std::log10(std::fabs(value)));
  const double scale = std::pow(10.0, digits - 1 - magnitude);
  return std::round(value * scale) / scale;
}

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string opt_fixed(const std::optional<double>& v, int decimals) {
  return v ? fixed(*v, decimals) : "";
}

}  // namespace

std::string format_length_change(double len_reduction) {
  auto text = fixed(-len_reduction * 100.0, 1);
  if (text == "-0.0") text = "0.0";
  return (text.front() == '-' ? "" : "+") + text + "%";
}

std::string format_speedup(double speedup) { return fixed(speedup, 2) + "x"; }

json to_json(const Comparison& c) {
  return {{"base_run", c.base_run},
          {"treated_run", c.treated_run},
          {"base", {{"accuracy", c.base_accuracy}, {"mean_tokens", c.base_tokens}, {"mean_latency_seconds", c.base_latency}}},
          {"treated",
           {{"accuracy", c.treated_accuracy}, {"mean_tokens", c.treated_tokens}, {"mean_latency_seconds", c.treated_latency}}},
          {"len_reduction", c.delta.len_reduction},
          {"speedup", c.delta.speedup},
          {"acc_gain", c.delta.acc_gain}};
}

Comparison comparison_from_json(const json& j) {
  Comparison c;
  c.base_run = j.at("base_run").get<std::string>();
  c.treated_run = j.at("treated_run").get<std::string>();
  c.base_accuracy = j.at("base").at("accuracy").get<double>();
  c.base_tokens = j.at("base").at("mean_tokens").get<double>();
  c.base_latency = j.at("base").at("mean_latency_seconds").get<double>();
  c.treated_accuracy = j.at("treated").at("accuracy").get<double>();
  c.treated_tokens = j.at("treated").at("mean_tokens").get<double>();
  c.treated_latency = j.at("treated").at("mean_latency_seconds").get<double>();
  c.delta = {j.at("len_reduction").get<double>(), j.at("speedup").get<double>(),
             j.at("acc_gain").get<double>()};
  return c;
}

json to_json(const ReportBundle& b) {
  json j = {{"runs", json::array()}};
  for (const auto& r : b.runs) j["runs"].push_back(to_json(r));
  if (!b.comparisons.empty()) {
    j["comparisons"] = json::array();
    for (const auto& c : b.comparisons) j["comparisons"].push_back(to_json(c));
  }
  return j;
}

ReportBundle report_bundle_from_json(const json& j) {
  ReportBundle b;
  for (const auto& r : j.at("runs")) b.runs.push_back(eval_report_from_json(r));
  if (j.contains("comparisons")) {
    for (const auto& c : j["comparisons"]) b.comparisons.push_back(comparison_from_json(c));
  }
  return b;
}

std::string report_csv(const ReportBundle& b) {
  std::ostringstream out;
  out << "kind,run_id,baseline,prompt_mode,token_counter,accuracy,mean_tokens,mean_latency_seconds,"
         "len_reduction,speedup,acc_gain,len_change,speedup_x\n";
  for (const auto& r : b.runs) {
    out << "run," << r.run_id << ",," << to_string(r.prompt_mode) << ',' << r.token_counter << ','
        << fixed(r.accuracy, 6) << ',' << fixed(r.mean_tokens, 3) << ','
        << fixed(r.mean_latency_seconds, 4) << ",,,,,\n";
  }
  for (const auto& c : b.comparisons) {
    out << "comparison," << c.treated_run << ',' << c.base_run << ",,," << fixed(c.treated_accuracy, 6)
        << ',' << fixed(c.treated_tokens, 3) << ',' << fixed(c.treated_latency, 4) << ','
        << fixed(c.delta.len_reduction, 6) << ',' << fixed(c.delta.speedup, 6) << ','
        << fixed(c.delta.acc_gain, 6) << ',' << format_length_change(c.delta.len_reduction) << ','
        << format_speedup(c.delta.speedup) << '\n';
  }
  return out.str();
}

std::string histogram_csv(const ReportBundle& b) {
  std::ostringstream out;
  out << "run_id,bucket_lower,bucket_upper,correct,incorrect\n";
  for (const auto& r : b.runs) {
    for (const auto& h : r.length_histogram) {
      out << r.run_id << ',' << h.lower << ',' << h.upper << ',' << h.correct << ',' << h.incorrect << '\n';
    }
  }
  return out.str();
}

std::string summary_table(const ReportBundle& b) {
  std::ostringstream out;
  char line[512];
  std::snprintf(line, sizeof line, "%-24s %-24s %8s %10s %10s %9s %10s %10s %10s\n", "run", "mode", "acc%",
                "tokens", "latency_s", "cognition", "reflect", "loop%", "counter");
  out << line;
  for (const auto& r : b.runs) {
    std::snprintf(line, sizeof line, "%-24s %-24s %8s %10s %10s %9s %10s %10s %10s\n", r.run_id.c_str(),
                  std::string(to_string(r.prompt_mode)).c_str(), fixed(100 * r.accuracy, 2).c_str(),
                  fixed(r.mean_tokens, 1).c_str(), fixed(r.mean_latency_seconds, 2).c_str(),
                  r.cognition_rate ? fixed(100 * *r.cognition_rate, 1).c_str() : "-",
                  opt_fixed(r.reflection_stats.overall, 2).c_str(),
                  r.loop_ratio.overall ? fixed(100 * *r.loop_ratio.overall, 1).c_str() : "-",
                  r.token_counter.c_str());
    out << line;
  }
  if (!b.comparisons.empty()) {
    out << "\n";
    for (const auto& c : b.comparisons) {
      std::snprintf(line, sizeof line, "%s vs %s: acc %s -> %s, len %s -> %s (%s), latency %s -> %s (%s)\n",
                    c.treated_run.c_str(), c.base_run.c_str(), fixed(100 * c.base_accuracy, 2).c_str(),
                    fixed(100 * c.treated_accuracy, 2).c_str(), fixed(c.base_tokens, 1).c_str(),
                    fixed(c.treated_tokens, 1).c_str(), format_length_change(c.delta.len_reduction).c_str(),
                    fixed(c.base_latency, 2).c_str(), fixed(c.treated_latency, 2).c_str(),
                    format_speedup(c.delta.speedup).c_str());
      out << line;
    }
  }
  return out.str();
}

void emit_report(const ReportBundle& b, const std::filesystem::path& out_dir) {
  write_file_atomic(out_dir / "report.json", to_json(b).dump(2) + "\n");
  write_file_atomic(out_dir / "report.csv", report_csv(b));
  write_file_atomic(out_dir / "histogram.csv", histogram_csv(b));
  write_file_atomic(out_dir / "summary.txt", summary_table(b));
}

ReportBundle read_report(const std::filesystem::path& report_json) {
  return report_bundle_from_json(json::parse(read_file(report_json)));
}

}  // namespace cogtune
