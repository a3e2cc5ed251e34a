#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace cogtune {

enum class Source { gsm8k, math, aime, omnimath, custom };
enum class Split { train, test };
enum class Difficulty { Easy, Hard, Excluded };
enum class DifficultyPolicy { train, eval };
enum class InputFormat { jsonl, csv };

std::string_view to_string(Source s);
std::string_view to_string(Split s);
std::string_view to_string(Difficulty d);
Source parse_source(std::string_view s);
Split parse_split(std::string_view s);
Difficulty parse_difficulty(std::string_view s);

struct Problem {
  std::string id;
  Source source = Source::custom;
  std::string question;
  std::string reference_answer;
  std::optional<double> raw_level;
  Split split = Split::train;

  bool operator==(const Problem&) const = default;
};

/// Ordered problem collection with unique ids.
class ProblemSet {
 public:
  ProblemSet() = default;

  /// Throws if the id is already present.
  void add(Problem p);

  const Problem* find(std::string_view id) const;
  const Problem& at(std::string_view id) const;

  std::size_t size() const { return problems_.size(); }
  bool empty() const { return problems_.empty(); }
  auto begin() const { return problems_.begin(); }
  auto end() const { return problems_.end(); }
  const std::vector<Problem>& problems() const { return problems_; }

 private:
  std::vector<Problem> problems_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct IngestResult {
  ProblemSet problems;
  std::size_t skipped = 0;
  std::vector<std::string> diagnostics;  // one per skipped record
  std::vector<std::string> warnings;
};

/// Reads problems record by record; malformed records are skipped and
/// reported. Throws only when the file itself cannot be read.
IngestResult ingest_dataset(const std::filesystem::path& path,
                            InputFormat format);

/// Infers the format from the extension (.csv, otherwise jsonl).
InputFormat format_from_path(const std::filesystem::path& path);

/// Easy/Hard bucketing. Train: gsm8k Easy, math lv3-5 Hard, math lv1-2
/// Excluded. Eval: gsm8k Easy, math lv1-2 Easy, lv4-5 Hard, aime Hard,
/// omnimath floor(level) 1-2 Easy / 4-5 Hard; level 3 is Excluded.
Difficulty assign_difficulty(const Problem& problem, DifficultyPolicy policy);

/// Label used for accuracy and length splits at evaluation time: identical to
/// the eval policy except that the level-3 middle band counts as Hard.
Difficulty scoring_difficulty(const Problem& problem);

nlohmann::json to_json(const Problem& p);
Problem problem_from_json(const nlohmann::json& j);

void write_problems_jsonl(const ProblemSet& set,
                          const std::filesystem::path& path);

}  // namespace cogtune
