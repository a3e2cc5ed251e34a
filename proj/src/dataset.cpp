#include "cogtune/dataset.hpp"

#include <sstream>

#include "cogtune/util.hpp"

namespace cogtune {

using nlohmann::json;

std::string_view to_string(Stage2Variant v) {
  switch (v) {
    case Stage2Variant::none: return "none";
    case Stage2Variant::redundancy_truncated: return "redundancy_truncated";
    case Stage2Variant::loop_simulated: return "loop_simulated";
  }
  return "none";
}

Stage2Variant parse_stage2_variant(std::string_view s) {
  if (s == "none") return Stage2Variant::none;
  if (s == "redundancy_truncated") return Stage2Variant::redundancy_truncated;
  if (s == "loop_simulated") return Stage2Variant::loop_simulated;
  throw Error("unknown stage2 variant '" + std::string(s) + "'");
}

std::string_view to_string(DeterminatorMode m) {
  return m == DeterminatorMode::llm_judge ? "llm_judge" : "rule_based";
}

DeterminatorMode parse_determinator_mode(std::string_view s) {
  if (s == "llm_judge") return DeterminatorMode::llm_judge;
  if (s == "rule_based") return DeterminatorMode::rule_based;
  throw Error("unknown determinator mode '" + std::string(s) + "'");
}

json to_json(const SftSample& s, bool with_stage2) {
  json j = {{"problem_id", s.problem_id},
            {"messages", json::array({{{"role", "user"}, {"content", s.question}},
                                      {{"role", "assistant"}, {"content", s.response}}})},
            {"difficulty", to_string(s.difficulty)},
            {"provenance", to_string(s.provenance)}};
  if (with_stage2) {
    j["stage2_variant"] = to_string(s.stage2_variant);
    j["determinator_mode"] = s.determinator_mode ? json(to_string(*s.determinator_mode)) : json();
    j["m"] = s.m ? json(*s.m) : json();
  }
  return j;
}

SftSample sample_from_json(const json& j) {
  SftSample s;
  s.problem_id = j.at("problem_id").get<std::string>();
  for (const auto& m : j.at("messages")) {
    const auto role = m.at("role").get<std::string>();
    if (role == "user") s.question = m.at("content").get<std::string>();
    if (role == "assistant") s.response = m.at("content").get<std::string>();
  }
  s.difficulty = parse_difficulty(j.at("difficulty").get<std::string>());
  s.provenance = parse_model_role(j.at("provenance").get<std::string>());
  if (j.contains("stage2_variant")) {
    s.stage2_variant = parse_stage2_variant(j["stage2_variant"].get<std::string>());
  }
  if (j.contains("determinator_mode") && !j["determinator_mode"].is_null()) {
    s.determinator_mode = parse_determinator_mode(j["determinator_mode"].get<std::string>());
  }
  if (j.contains("m") && !j["m"].is_null()) s.m = j["m"].get<int>();
  return s;
}

std::string dataset_jsonl(const Dataset& d, bool with_stage2) {
  std::string out;
  for (const auto& s : d.samples) {
    out += to_json(s, with_stage2).dump();
    out += '\n';
  }
  return out;
}

void write_dataset(Dataset& d, const std::filesystem::path& dir, const std::string& jsonl_name,
                   bool with_stage2) {
  const auto body = dataset_jsonl(d, with_stage2);
  d.manifest["dataset_file"] = jsonl_name;
  d.manifest["dataset_sha256"] = sha256_hex(body);
  write_file_atomic(dir / jsonl_name, body);
  write_file_atomic(dir / "manifest.json", d.manifest.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& jsonl, const ProblemSet& problems) {
  Dataset d;
  std::istringstream in(read_file(jsonl));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_view(line).empty()) continue;
    try {
      auto s = sample_from_json(json::parse(line));
      s.reference_answer = problems.at(s.problem_id).reference_answer;
      d.samples.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw Error(jsonl.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  const auto manifest_path = jsonl.parent_path() / "manifest.json";
  if (std::filesystem::exists(manifest_path)) d.manifest = json::parse(read_file(manifest_path));
  return d;
}

}  // namespace cogtune
