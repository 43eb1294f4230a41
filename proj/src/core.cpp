#include "spare/core.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <regex>

#include "spare/errors.hpp"

namespace spare {

namespace {

bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

std::string rtrim(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.pop_back();
  }
  return s;
}

std::string trim(std::string s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return s;
}

// Strips answer-box markup: \boxed{...} wrappers, enclosing $...$, and a
// trailing sentence period.
std::string strip_markup(std::string s) {
  s = trim(s);
  const std::string boxed = "\\boxed{";
  auto pos = s.find(boxed);
  if (pos != std::string::npos) {
    std::size_t depth = 1;
    std::size_t i = pos + boxed.size();
    std::size_t start = i;
    for (; i < s.size() && depth > 0; ++i) {
      if (s[i] == '{') ++depth;
      if (s[i] == '}') --depth;
    }
    if (depth == 0) {
      s = s.substr(0, pos) + s.substr(start, i - 1 - start) + s.substr(i);
    }
  }
  s = trim(s);
  if (s.size() >= 2 && s.front() == '$' && s.back() == '$') {
    s = s.substr(1, s.size() - 2);
  }
  s = trim(s);
  while (!s.empty() && s.back() == '.') s.pop_back();
  return trim(s);
}

// Drops commas acting as thousands separators (digit on both sides).
std::string strip_separators(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == ',' && i > 0 && i + 1 < s.size() &&
        std::isdigit(static_cast<unsigned char>(s[i - 1])) &&
        std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
      continue;
    }
    out.push_back(s[i]);
  }
  return out;
}

// "a/b" with integer a, b -> reduced, sign-normalized form; "n/1" -> "n".
std::string canonical_fraction(const std::string& s) {
  static const std::regex frac(R"(^([+-]?\d{1,18})\s*/\s*([+-]?\d{1,18})$)");
  std::smatch m;
  if (!std::regex_match(s, m, frac)) return s;
  long long num = std::stoll(m[1].str());
  long long den = std::stoll(m[2].str());
  if (den == 0) return s;
  if (den < 0) {
    num = -num;
    den = -den;
  }
  long long g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  if (den == 1) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(den);
}

std::string strip_punctuation(const std::string& s) {
  static const std::string punct = ".,!?;:'\"`";
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (punct.find(c) == std::string::npos) out.push_back(c);
  }
  return out;
}

std::string collapse_whitespace(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(c);
  }
  return out;
}

std::string apply_normalizer(const std::string& name, const std::string& s) {
  if (name == "trim") return trim(s);
  if (name == "casefold") return to_lower(s);
  if (name == "strip_markup") return strip_markup(s);
  if (name == "strip_separators") return strip_separators(s);
  if (name == "canonical_fraction") return canonical_fraction(s);
  if (name == "strip_punctuation") return strip_punctuation(s);
  if (name == "collapse_whitespace") return collapse_whitespace(s);
  throw ConfigError({"unknown normalizer '" + name + "'"});
}

}  // namespace

std::vector<std::string> segment_steps(const std::string& raw_text,
                                       const std::string& split_pattern) {
  std::vector<std::string> pieces;
  if (split_pattern.empty()) {
    std::size_t start = 0;
    while (start <= raw_text.size()) {
      std::size_t nl = raw_text.find('\n', start);
      if (nl == std::string::npos) {
        pieces.push_back(raw_text.substr(start));
        break;
      }
      pieces.push_back(raw_text.substr(start, nl - start));
      start = nl + 1;
    }
  } else {
    std::regex re(split_pattern);
    std::sregex_token_iterator it(raw_text.begin(), raw_text.end(), re, -1);
    std::sregex_token_iterator end;
    for (; it != end; ++it) pieces.push_back(*it);
  }

  std::vector<std::string> steps;
  for (auto& piece : pieces) {
    if (is_blank(piece)) continue;
    steps.push_back(rtrim(std::move(piece)));
  }
  if (steps.empty()) throw EmptyOutput("no step survives trimming");
  return steps;
}

std::string normalize_answer(const std::string& raw,
                             const DatasetProfile& profile) {
  std::string current = raw;
  // Every named normalizer is contracting, so the pipeline converges in a
  // couple of passes; the fixpoint loop makes idempotence unconditional.
  for (int pass = 0; pass < 8; ++pass) {
    std::string next = current;
    for (const auto& name : profile.normalizers) {
      next = apply_normalizer(name, next);
    }
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

std::optional<std::string> extract_answer_text(const std::string& final_step,
                                               const DatasetProfile& profile) {
  if (profile.answer_marker.empty()) return std::nullopt;
  std::string haystack = to_lower(final_step);
  std::string needle = to_lower(profile.answer_marker);
  std::size_t pos = haystack.rfind(needle);
  if (pos == std::string::npos) return std::nullopt;
  std::string tail = final_step.substr(pos + needle.size());
  // The answer runs to the end of the line the marker sits on.
  std::size_t nl = tail.find('\n');
  if (nl != std::string::npos) tail = tail.substr(0, nl);
  tail = trim(tail);
  if (!tail.empty() && tail.back() == '.') tail.pop_back();
  tail = trim(tail);
  if (tail.empty()) return std::nullopt;
  return tail;
}

std::optional<std::string> extract_answer(const Candidate& candidate,
                                          const DatasetProfile& profile) {
  if (candidate.steps.empty()) return std::nullopt;
  auto raw = extract_answer_text(candidate.steps.back(), profile);
  if (!raw) return std::nullopt;
  return normalize_answer(*raw, profile);
}

OutcomeLabel outcome_label(const std::optional<std::string>& candidate_answer,
                           const std::string& gold_answer) {
  if (!candidate_answer) return OutcomeLabel{false};
  return OutcomeLabel{*candidate_answer == gold_answer};
}

Candidate make_candidate(const std::string& problem_id,
                         const std::string& raw_text, const Decoding& decoding,
                         const DatasetProfile& profile) {
  Candidate c;
  c.problem_id = problem_id;
  c.raw_text = raw_text;
  c.decoding = decoding;
  c.steps = segment_steps(raw_text, profile.step_split_pattern);
  c.extracted_raw = extract_answer_text(c.steps.back(), profile);
  if (c.extracted_raw) {
    c.extracted_answer = normalize_answer(*c.extracted_raw, profile);
  }
  return c;
}

Json problem_to_json(const Problem& p) {
  Json j;
  j["id"] = p.id;
  j["context"] = p.context;
  j["reference"] = p.reference;
  j["gold_answer"] = p.gold_answer_raw;
  j["profile"] = p.profile;
  return j;
}

Problem problem_from_json(const Json& j) {
  Problem p;
  p.id = j.at("id").get<std::string>();
  p.context = j.at("context").get<std::vector<std::string>>();
  p.reference = j.at("reference").get<std::vector<std::string>>();
  p.gold_answer_raw = j.at("gold_answer").get<std::string>();
  p.profile = j.at("profile").get<std::string>();
  p.gold_answer = normalize_answer(p.gold_answer_raw, get_profile(p.profile));
  return p;
}

Problem make_problem(const Json& raw) {
  Problem p = problem_from_json(raw);
  std::vector<std::string> errors;
  if (p.id.empty()) errors.push_back("problem id must be non-empty");
  if (p.context.empty()) errors.push_back("context must have >= 1 sentence");
  if (p.reference.empty()) errors.push_back("reference must have >= 1 step");
  if (trim(p.gold_answer_raw).empty()) errors.push_back("gold_answer is blank");
  if (!errors.empty()) {
    for (auto& e : errors) e = "problem '" + p.id + "': " + e;
    throw ConfigError(errors);
  }
  return p;
}

Json candidate_to_json(const Candidate& c) {
  Json j;
  j["problem_id"] = c.problem_id;
  j["sample_index"] = c.decoding.sample_index;
  j["raw_text"] = c.raw_text;
  j["steps"] = c.steps;
  j["temperature"] = c.decoding.temperature;
  j["seed"] = c.decoding.seed;
  if (c.extracted_answer) {
    j["extracted_answer"] = *c.extracted_answer;
  } else {
    j["extracted_answer"] = nullptr;
  }
  return j;
}

Candidate candidate_from_json(const Json& j) {
  Candidate c;
  c.problem_id = j.at("problem_id").get<std::string>();
  c.decoding.sample_index = j.at("sample_index").get<int>();
  c.raw_text = j.at("raw_text").get<std::string>();
  c.steps = j.at("steps").get<std::vector<std::string>>();
  c.decoding.temperature = j.at("temperature").get<double>();
  c.decoding.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("extracted_answer") && !j.at("extracted_answer").is_null()) {
    c.extracted_answer = j.at("extracted_answer").get<std::string>();
  }
  return c;
}

}  // namespace spare
