#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace cogtune {

enum class ExtractionSource { boxed, conclusion_tail, none };

std::string_view to_string(ExtractionSource s);

struct ExtractedAnswer {
  std::string raw;
  std::string normalized;
  ExtractionSource source = ExtractionSource::none;
};

/// Exact rational with a positive denominator in lowest terms.
struct Rational {
  boost::multiprecision::cpp_int num = 0;
  boost::multiprecision::cpp_int den = 1;

  bool operator==(const Rational&) const = default;
};

/// Last non-empty \boxed{...} (or \fbox{...}) anywhere in the text; otherwise
/// the last number in the conclusion segment (after the final </think>, or
/// the whole text when there is none).
ExtractedAnswer extract_final_answer(std::string_view trace_text);

/// Whitespace/case folding plus the cheap symbolic rewrites: surrounding $,
/// \left/\right, \dfrac/\tfrac, thousands separators, trailing period.
std::string normalize_answer(std::string_view answer);

/// Parses integers, terminating decimals, a/b and \frac{a}{b} exactly.
std::optional<Rational> parse_exact_number(std::string_view normalized);

struct Grade {
  bool correct = false;
  /// Set when the answers differ and at least one is not a plain number, so
  /// the deterministic normalizer cannot vouch for the verdict.
  bool needs_review = false;
};

/// Symmetric equivalence of two answer strings.
Grade grade_answers(std::string_view a, std::string_view b);

Grade grade(const ExtractedAnswer& extracted, std::string_view reference);

/// The correctness indicator used to filter every response pool.
bool is_correct(const ExtractedAnswer& extracted, std::string_view reference);

/// extract_final_answer + is_correct.
bool response_is_correct(std::string_view response, std::string_view reference);

}  // namespace cogtune
