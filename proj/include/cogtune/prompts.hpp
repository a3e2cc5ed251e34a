#pragma once

#include <map>
#include <string>
#include <string_view>

#include "cogtune/trace.hpp"

namespace cogtune {

/// Replaces every "{name}" with vars[name]; unknown placeholders are left as is.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars);

/// Hypnosis bodies injected by the dataset builders. Defaults are the
/// canonical strings the chunker recognizes.
struct HypnosisStrings {
  std::string easy{kEasyHypnosis};
  std::string hard{kHardHypnosis};
  std::string redundancy{kRedundancyHypnosis};
  std::string loop{kLoopHypnosis};
};

struct PromptTemplates {
  std::string system_prompt;
  /// {question}
  std::string user = "{question}\nPlease reason step by step, and put your final answer within \\boxed{}.";
  /// Difficulty reminder placed before the question; {question}
  std::string d_prompt =
      "Before solving, judge how hard this problem is for you. If it is easy, think briefly and "
      "answer quickly; if it is hard, reason as carefully as needed.\n\n{question}\nPlease reason "
      "step by step, and put your final answer within \\boxed{}.";
  /// Forced assistant prefix that closes the think segment immediately.
  std::string nothinking_prefix = "<think></think>\n\n";
  /// Conclusion written after truncated or wrapped thoughts; {answer}
  std::string conclusion = "\n\nThe final answer is $\\boxed{{answer}}$.";
  /// Redundancy judge; {question} {context} {chunk}
  std::string judge_redundancy =
      "You are auditing a step-by-step solution for redundant reasoning.\n\n"
      "Problem:\n{question}\n\n"
      "Reasoning so far:\n{context}\n\n"
      "Candidate step:\n{chunk}\n\n"
      "Does the candidate step add a new deduction, intermediate result, or correction that the "
      "reasoning so far does not already contain? If it only re-verifies, restates, or "
      "double-checks results that are already established, it is redundant. If it repeats an "
      "earlier step in a circular way without progress, it is a loop.\n\n"
      "Answer with exactly one word: CONTRIBUTES, REDUNDANT, or LOOP.";
  /// Appended on judge retries after an unparseable reply; {attempt}
  std::string judge_retry_suffix =
      "\n\n(Attempt {attempt}) Reply with one word only: CONTRIBUTES, REDUNDANT, or LOOP.";
};

}  // namespace cogtune
