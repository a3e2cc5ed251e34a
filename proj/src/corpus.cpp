#include "cogtune/corpus.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "cogtune/util.hpp"

namespace cogtune {

using nlohmann::json;

std::string_view to_string(Source s) {
  switch (s) {
    case Source::gsm8k: return "gsm8k";
    case Source::math: return "math";
    case Source::aime: return "aime";
    case Source::omnimath: return "omnimath";
    case Source::custom: return "custom";
  }
  return "custom";
}

std::string_view to_string(Split s) {
  return s == Split::train ? "train" : "test";
}

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "Easy";
    case Difficulty::Hard: return "Hard";
    case Difficulty::Excluded: return "Excluded";
  }
  return "Excluded";
}

Source parse_source(std::string_view s) {
  const auto v = to_lower(trim_view(s));
  if (v == "gsm8k") return Source::gsm8k;
  if (v == "math" || v == "math500" || v == "math-500") return Source::math;
  if (v == "aime" || v == "aime2024") return Source::aime;
  if (v == "omnimath" || v == "omni-math") return Source::omnimath;
  if (v == "custom") return Source::custom;
  throw Error("unknown source '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  const auto v = to_lower(trim_view(s));
  if (v == "train") return Split::train;
  if (v == "test") return Split::test;
  throw Error("unknown split '" + std::string(s) + "'");
}

Difficulty parse_difficulty(std::string_view s) {
  const auto v = to_lower(trim_view(s));
  if (v == "easy") return Difficulty::Easy;
  if (v == "hard") return Difficulty::Hard;
  if (v == "excluded") return Difficulty::Excluded;
  throw Error("unknown difficulty '" + std::string(s) + "'");
}

void ProblemSet::add(Problem p) {
  if (index_.count(p.id) != 0) throw Error("duplicate problem id '" + p.id + "'");
  index_.emplace(p.id, problems_.size());
  problems_.push_back(std::move(p));
}

const Problem* ProblemSet::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &problems_[it->second];
}

const Problem& ProblemSet::at(std::string_view id) const {
  const auto* p = find(id);
  if (p == nullptr) throw Error("unknown problem id '" + std::string(id) + "'");
  return *p;
}

namespace {

// Accepts 3, 3.5, "3", "Level 3".
std::optional<double> parse_level(const json& v) {
  if (v.is_null()) return std::nullopt;
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    auto s = trim(v.get<std::string>());
    const auto lower = to_lower(s);
    if (lower.rfind("level", 0) == 0) s = trim(std::string_view(s).substr(5));
    if (s.empty() || s == "?") return std::nullopt;
    std::size_t used = 0;
    const double d = std::stod(s, &used);
    if (used != s.size()) throw Error("bad level '" + v.get<std::string>() + "'");
    return d;
  }
  throw Error("level must be a number or string");
}

std::string require_string(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(std::string("missing field \"") + key + "\"");
  const auto& v = j.at(key);
  std::string s;
  if (v.is_string()) {
    s = v.get<std::string>();
  } else if (v.is_number()) {
    s = v.dump();
  } else {
    throw Error(std::string("field \"") + key + "\" must be a string");
  }
  if (trim_view(s).empty()) throw Error(std::string("field \"") + key + "\" is empty");
  return s;
}

void validate(const Problem& p) {
  const bool needs_level = p.source == Source::math || p.source == Source::omnimath;
  if (needs_level && !p.raw_level) {
    throw Error("source " + std::string(to_string(p.source)) + " requires \"level\"");
  }
  if (p.source == Source::math && p.raw_level &&
      (*p.raw_level < 1 || *p.raw_level > 5)) {
    throw Error("math level must be in 1..5");
  }
}

// Minimal RFC 4180 reader: quoted fields, doubled quotes, embedded newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool row_has_content = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      row_has_content = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      row_has_content = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (row_has_content || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      row_has_content = false;
    } else {
      field.push_back(c);
      row_has_content = true;
    }
  }
  if (row_has_content || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

void add_record(IngestResult& result, const json& record, std::size_t record_no) {
  try {
    auto p = problem_from_json(record);
    if (result.problems.find(p.id) != nullptr) {
      throw Error("duplicate id '" + p.id + "'");
    }
    result.problems.add(std::move(p));
  } catch (const std::exception& e) {
    ++result.skipped;
    result.diagnostics.push_back("record " + std::to_string(record_no) + ": " + e.what());
  }
}

}  // namespace

Problem problem_from_json(const json& j) {
  if (!j.is_object()) throw Error("record is not a JSON object");
  Problem p;
  p.id = require_string(j, "id");
  p.source = parse_source(require_string(j, "source"));
  p.question = require_string(j, "question");
  p.reference_answer = require_string(j, "answer");
  if (j.contains("level")) p.raw_level = parse_level(j.at("level"));
  if (j.contains("split") && !j.at("split").is_null()) {
    p.split = parse_split(j.at("split").get<std::string>());
  }
  validate(p);
  return p;
}

json to_json(const Problem& p) {
  json j = {{"id", p.id},
            {"source", to_string(p.source)},
            {"question", p.question},
            {"answer", p.reference_answer}};
  if (p.raw_level) {
    const double l = *p.raw_level;
    if (std::floor(l) == l) {
      j["level"] = static_cast<long long>(l);
    } else {
      j["level"] = l;
    }
  }
  j["split"] = to_string(p.split);
  return j;
}

InputFormat format_from_path(const std::filesystem::path& path) {
  return to_lower(path.extension().string()) == ".csv" ? InputFormat::csv
                                                        : InputFormat::jsonl;
}

IngestResult ingest_dataset(const std::filesystem::path& path, InputFormat format) {
  const std::string text = read_file(path);
  IngestResult result;

  if (format == InputFormat::jsonl) {
    std::size_t line_no = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim_view(line).empty()) continue;
      json record;
      try {
        record = json::parse(line);
      } catch (const json::parse_error& e) {
        ++result.skipped;
        result.diagnostics.push_back("record " + std::to_string(line_no) +
                                     ": invalid JSON (" + e.what() + ")");
        continue;
      }
      add_record(result, record, line_no);
    }
  } else {
    const auto rows = parse_csv(text);
    if (!rows.empty()) {
      const auto& header = rows.front();
      for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size()) {
          ++result.skipped;
          result.diagnostics.push_back("record " + std::to_string(r) + ": expected " +
                                       std::to_string(header.size()) + " columns, got " +
                                       std::to_string(row.size()));
          continue;
        }
        json record = json::object();
        for (std::size_t c = 0; c < header.size(); ++c) {
          const auto key = trim(header[c]);
          if (key == "level" && trim_view(row[c]).empty()) continue;
          record[key] = row[c];
        }
        add_record(result, record, r);
      }
    }
  }

  if (result.problems.empty()) {
    result.warnings.push_back("no problems ingested from " + path.string());
  }
  return result;
}

Difficulty assign_difficulty(const Problem& problem, DifficultyPolicy policy) {
  auto level = [&]() -> int {
    if (!problem.raw_level) {
      throw Error("problem '" + problem.id + "' (" +
                  std::string(to_string(problem.source)) + ") has no level");
    }
    return static_cast<int>(std::floor(*problem.raw_level));
  };
  auto by_range = [](int lv) {
    if (lv <= 2) return Difficulty::Easy;
    if (lv >= 4) return Difficulty::Hard;
    return Difficulty::Excluded;
  };

  switch (problem.source) {
    case Source::gsm8k:
      return Difficulty::Easy;
    case Source::aime:
      return Difficulty::Hard;
    case Source::math: {
      const int lv = level();
      if (policy == DifficultyPolicy::train) {
        return lv >= 3 ? Difficulty::Hard : Difficulty::Excluded;
      }
      return by_range(lv);
    }
    case Source::omnimath:
    case Source::custom:
      return by_range(level());
  }
  return Difficulty::Excluded;
}

Difficulty scoring_difficulty(const Problem& problem) {
  const auto d = assign_difficulty(problem, DifficultyPolicy::eval);
  return d == Difficulty::Excluded ? Difficulty::Hard : d;
}

void write_problems_jsonl(const ProblemSet& set, const std::filesystem::path& path) {
  std::string out;
  for (const auto& p : set) {
    out += to_json(p).dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace cogtune
