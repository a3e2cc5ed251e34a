#include "cogtune/answer_judge.hpp"

#include <cctype>
#include <regex>
#include <stdexcept>

#include "cogtune/util.hpp"

namespace cogtune {

namespace mp = boost::multiprecision;

std::string_view to_string(ExtractionSource s) {
  switch (s) {
    case ExtractionSource::boxed: return "boxed";
    case ExtractionSource::conclusion_tail: return "conclusion_tail";
    case ExtractionSource::none: return "none";
  }
  return "none";
}

namespace {

// Content of the brace group opening at text[open] == '{', or nullopt if the
// group never closes.
std::optional<std::string_view> brace_group(std::string_view text, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < text.size(); ++i) {
    if (text[i] == '{') {
      ++depth;
    } else if (text[i] == '}') {
      if (--depth == 0) return text.substr(open + 1, i - open - 1);
    }
  }
  return std::nullopt;
}

std::optional<std::string> last_boxed(std::string_view text) {
  for (std::string_view cmd : {std::string_view("\\boxed"), std::string_view("\\fbox")}) {
    std::optional<std::string> best;
    std::size_t pos = 0;
    while ((pos = text.find(cmd, pos)) != std::string_view::npos) {
      std::size_t i = pos + cmd.size();
      while (i < text.size() && text[i] == ' ') ++i;
      if (i < text.size() && text[i] == '{') {
        if (auto g = brace_group(text, i); g && !trim_view(*g).empty()) best = trim(*g);
      }
      pos += cmd.size();
    }
    if (best) return best;
  }
  return std::nullopt;
}

std::string_view conclusion_segment(std::string_view text) {
  const auto close = text.rfind("</think>");
  return close == std::string_view::npos ? text : text.substr(close + 8);
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

// Removes a LaTeX command only when it is not the prefix of a longer one.
void remove_command(std::string& s, std::string_view cmd) {
  std::size_t pos = 0;
  while ((pos = s.find(cmd, pos)) != std::string::npos) {
    const std::size_t end = pos + cmd.size();
    if (end < s.size() && std::isalpha(static_cast<unsigned char>(s[end]))) {
      pos = end;
      continue;
    }
    s.erase(pos, cmd.size());
  }
}

std::optional<Rational> make_rational(mp::cpp_int num, mp::cpp_int den) {
  if (den == 0) return std::nullopt;
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const mp::cpp_int g = mp::gcd(mp::abs(num), den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  return Rational{num, den};
}

// [+-]digits[.digits] with no exponent.
std::optional<Rational> parse_decimal(std::string_view s) {
  if (s.empty()) return std::nullopt;
  bool negative = false;
  if (s.front() == '+' || s.front() == '-') {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.empty() || s.size() > 60) return std::nullopt;
  mp::cpp_int num = 0;
  mp::cpp_int den = 1;
  bool seen_dot = false;
  bool seen_digit = false;
  for (char c : s) {
    if (c == '.') {
      if (seen_dot) return std::nullopt;
      seen_dot = true;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      num = num * 10 + (c - '0');
      if (seen_dot) den *= 10;
      seen_digit = true;
    } else {
      return std::nullopt;
    }
  }
  if (!seen_digit) return std::nullopt;
  return make_rational(negative ? -num : num, den);
}

std::optional<Rational> divide(const std::optional<Rational>& a,
                               const std::optional<Rational>& b) {
  if (!a || !b || b->num == 0) return std::nullopt;
  return make_rational(a->num * b->den, a->den * b->num);
}

bool is_plain_number(std::string_view normalized) {
  return parse_exact_number(normalized).has_value();
}

}  // namespace

ExtractedAnswer extract_final_answer(std::string_view trace_text) {
  ExtractedAnswer out;
  if (auto boxed = last_boxed(trace_text)) {
    out.raw = *boxed;
    out.source = ExtractionSource::boxed;
  } else {
    static const std::regex number(
        R"(\\frac\{-?\d+\}\{\d+\}|-?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?(?:/\d+)?)");
    const std::string tail(conclusion_segment(trace_text));
    std::string last;
    for (auto it = std::sregex_iterator(tail.begin(), tail.end(), number);
         it != std::sregex_iterator(); ++it) {
      last = it->str();
    }
    if (!last.empty()) {
      out.raw = last;
      out.source = ExtractionSource::conclusion_tail;
    }
  }
  if (!out.raw.empty()) out.normalized = normalize_answer(out.raw);
  return out;
}

std::string normalize_answer(std::string_view answer) {
  std::string s = straighten_quotes(trim_view(answer));

  // Surrounding math delimiters.
  bool stripped = true;
  while (stripped) {
    stripped = false;
    auto t = trim(s);
    while (!t.empty() && t.back() == '.') t.pop_back();
    if (t.size() >= 2 && t.front() == '$' && t.back() == '$') {
      t = t.substr(1, t.size() - 2);
      stripped = true;
    } else if (t.size() >= 4 && t.rfind("\\(", 0) == 0 &&
               t.compare(t.size() - 2, 2, "\\)") == 0) {
      t = t.substr(2, t.size() - 4);
      stripped = true;
    }
    s = t;
  }

  remove_command(s, "\\left");
  remove_command(s, "\\right");
  replace_all(s, "\\dfrac", "\\frac");
  replace_all(s, "\\tfrac", "\\frac");
  replace_all(s, "\\!", "");
  replace_all(s, "\\,", "");
  replace_all(s, "\\;", "");

  std::string folded;
  folded.reserve(s.size());
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    folded.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  while (!folded.empty() && folded.back() == '.') folded.pop_back();

  static const std::regex thousands(R"(-?\d{1,3}(,\d{3})+(\.\d+)?)");
  if (std::regex_match(folded, thousands)) {
    std::string no_commas;
    for (char c : folded) {
      if (c != ',') no_commas.push_back(c);
    }
    folded = std::move(no_commas);
  }
  return folded;
}

std::optional<Rational> parse_exact_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (auto d = parse_decimal(s)) return d;

  // -\frac{a}{b} and \frac{a}{b}
  std::string_view body = s;
  bool negative = false;
  if (body.front() == '-') {
    negative = true;
    body.remove_prefix(1);
  }
  if (body.rfind("\\frac{", 0) == 0) {
    const auto num = brace_group(body, 5);
    if (!num) return std::nullopt;
    const std::size_t den_open = 5 + num->size() + 2;
    if (den_open >= body.size() || body[den_open] != '{') return std::nullopt;
    const auto den = brace_group(body, den_open);
    if (!den || den_open + den->size() + 2 != body.size()) return std::nullopt;
    auto r = divide(parse_decimal(*num), parse_decimal(*den));
    if (r && negative) r->num = -r->num;
    return r;
  }

  const auto slash = s.find('/');
  if (slash != std::string_view::npos && s.find('/', slash + 1) == std::string_view::npos) {
    return divide(parse_decimal(s.substr(0, slash)), parse_decimal(s.substr(slash + 1)));
  }
  return std::nullopt;
}

Grade grade_answers(std::string_view a, std::string_view b) {
  const auto na = normalize_answer(a);
  const auto nb = normalize_answer(b);
  if (na.empty() || nb.empty()) return {};
  if (na == nb) return {true, false};
  const auto ra = parse_exact_number(na);
  const auto rb = parse_exact_number(nb);
  if (ra && rb) return {*ra == *rb, false};
  return {false, !is_plain_number(na) || !is_plain_number(nb)};
}

Grade grade(const ExtractedAnswer& extracted, std::string_view reference) {
  if (trim_view(reference).empty()) {
    throw std::invalid_argument("reference answer must be non-empty");
  }
  if (extracted.source == ExtractionSource::none) return {};
  return grade_answers(extracted.raw, reference);
}

bool is_correct(const ExtractedAnswer& extracted, std::string_view reference) {
  return grade(extracted, reference).correct;
}

bool response_is_correct(std::string_view response, std::string_view reference) {
  return is_correct(extract_final_answer(response), reference);
}

}  // namespace cogtune
