#include "spare/annotate.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "spare/digest.hpp"
#include "spare/rng.hpp"
#include "spare/supervise.hpp"

namespace spare {

std::string to_string(AlignmentKind kind) {
  switch (kind) {
    case AlignmentKind::one_to_one:
      return "one_to_one";
    case AlignmentKind::one_to_many_composite_output:
      return "one_to_many_composite_output";
    case AlignmentKind::one_to_many_composite_reference:
      return "one_to_many_composite_reference";
    case AlignmentKind::unaligned:
      return "unaligned";
  }
  return "unaligned";
}

AlignmentKind classify_alignment(const StepEvaluation& e) {
  std::size_t combining = e.student_combining_steps.size();
  std::size_t anchors =
      e.question_sentences.size() + e.matching_reference_steps.size();
  std::size_t total = combining + anchors;
  if (total == 0) return AlignmentKind::unaligned;
  if (total == 1) return AlignmentKind::one_to_one;
  if (combining == 0) return AlignmentKind::one_to_many_composite_output;
  return AlignmentKind::one_to_many_composite_reference;
}

std::string ValidationReport::summary() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += v.describe();
  }
  return out;
}

namespace {

// Locates the first syntactically complete JSON array starting at or after
// `from`, honoring strings and escapes. Returns npos when none closes.
std::size_t find_array_end(const std::string& text, std::size_t from) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = from; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == '{') {
      ++depth;
    } else if (c == ']' || c == '}') {
      --depth;
      if (depth == 0 && c == ']') return i;
      if (depth < 0) return std::string::npos;
    }
  }
  return std::string::npos;
}

// Deterministic cleanup of near-JSON judge output: drops trailing commas
// before a closing bracket and restores the comma between juxtaposed
// objects or arrays. String contents are never touched.
std::string repair_json(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  bool escaped = false;
  auto next_token = [&](std::size_t i) -> char {
    for (std::size_t j = i + 1; j < text.size(); ++j) {
      if (!std::isspace(static_cast<unsigned char>(text[j]))) return text[j];
    }
    return '\0';
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      out.push_back(c);
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out.push_back(c);
      continue;
    }
    if (c == ',') {
      char next = next_token(i);
      if (next == '}' || next == ']') continue;  // trailing comma
    }
    out.push_back(c);
    if (c == '}' || c == ']') {
      char next = next_token(i);
      if ((c == '}' && next == '{') || (c == ']' && next == '[')) {
        out.push_back(',');
      }
    }
  }
  return out;
}

std::vector<int> read_index_list(const Json& value, const std::string& key,
                                 std::size_t object_index) {
  if (!value.is_array()) {
    throw SchemaViolation("evaluation object " + std::to_string(object_index) +
                          ": '" + key + "' must be a list of integers");
  }
  std::vector<int> out;
  for (const auto& item : value) {
    if (item.is_number_integer()) {
      out.push_back(item.get<int>());
    } else if (item.is_string()) {
      try {
        out.push_back(std::stoi(item.get<std::string>()));
      } catch (...) {
        throw SchemaViolation("evaluation object " +
                              std::to_string(object_index) + ": '" + key +
                              "' holds a non-numeric entry");
      }
    } else {
      throw SchemaViolation("evaluation object " +
                            std::to_string(object_index) + ": '" + key +
                            "' holds a non-integer entry");
    }
  }
  return out;
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return static_cast<char>(std::toupper(c));
  });
  return s;
}

StepEvaluation evaluation_from_object(const Json& obj,
                                      std::size_t object_index) {
  if (!obj.is_object()) {
    throw SchemaViolation("array entry " + std::to_string(object_index) +
                          " is not an object");
  }
  for (const auto& key : evaluation_schema_keys()) {
    if (!obj.contains(key)) {
      throw SchemaViolation("evaluation object " +
                            std::to_string(object_index) + ": missing key '" +
                            key + "'");
    }
  }

  StepEvaluation e;
  const Json& step = obj.at("student_step");
  if (step.is_number_integer()) {
    e.student_step = step.get<int>();
  } else if (step.is_string()) {
    try {
      e.student_step = std::stoi(step.get<std::string>());
    } catch (...) {
      throw SchemaViolation("evaluation object " +
                            std::to_string(object_index) +
                            ": 'student_step' is not an integer");
    }
  } else {
    throw SchemaViolation("evaluation object " + std::to_string(object_index) +
                          ": 'student_step' is not an integer");
  }

  if (!obj.at("reasoning").is_string()) {
    throw SchemaViolation("evaluation object " + std::to_string(object_index) +
                          ": 'reasoning' must be a string");
  }
  e.reasoning = obj.at("reasoning").get<std::string>();
  e.question_sentences =
      read_index_list(obj.at("question_sentences"), "question_sentences",
                      object_index);
  e.student_combining_steps =
      read_index_list(obj.at("student_combining_steps"),
                      "student_combining_steps", object_index);
  e.matching_reference_steps =
      read_index_list(obj.at("matching_reference_steps"),
                      "matching_reference_steps", object_index);

  const Json& categories = obj.at("error_category");
  if (categories.is_string()) {
    e.error_category.push_back(upper(categories.get<std::string>()));
  } else if (categories.is_array()) {
    for (const auto& item : categories) {
      if (!item.is_string()) {
        throw SchemaViolation("evaluation object " +
                              std::to_string(object_index) +
                              ": 'error_category' holds a non-string entry");
      }
      e.error_category.push_back(upper(item.get<std::string>()));
    }
  } else {
    throw SchemaViolation("evaluation object " + std::to_string(object_index) +
                          ": 'error_category' must be a list of strings");
  }

  // The label sometimes arrives as a single-element list; coerce to scalar.
  Json label = obj.at("label");
  if (label.is_array()) {
    if (label.size() != 1) {
      throw SchemaViolation("evaluation object " +
                            std::to_string(object_index) +
                            ": 'label' list must have exactly one entry");
    }
    label = label.at(0);
  }
  if (!label.is_string()) {
    throw SchemaViolation("evaluation object " + std::to_string(object_index) +
                          ": 'label' must be CORRECT or INCORRECT");
  }
  std::string value = upper(label.get<std::string>());
  if (value == "CORRECT") {
    e.label_correct = true;
  } else if (value == "INCORRECT") {
    e.label_correct = false;
  } else {
    throw SchemaViolation("evaluation object " + std::to_string(object_index) +
                          ": 'label' must be CORRECT or INCORRECT, got '" +
                          value + "'");
  }
  return e;
}

}  // namespace

std::vector<StepEvaluation> parse_evaluation(const std::string& raw,
                                             const DatasetProfile& profile) {
  (void)profile;  // category membership is a validation concern
  if (raw.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ParseFailure("judge reply is empty");
  }

  std::size_t search = 0;
  std::string last_schema_error;
  while (true) {
    std::size_t start = raw.find('[', search);
    if (start == std::string::npos) break;
    std::size_t end = find_array_end(raw, start);
    if (end == std::string::npos) {
      search = start + 1;
      continue;
    }
    std::string snippet = raw.substr(start, end - start + 1);
    Json parsed;
    bool ok = false;
    try {
      parsed = Json::parse(snippet);
      ok = true;
    } catch (const nlohmann::json::exception&) {
      try {
        parsed = Json::parse(repair_json(snippet));
        ok = true;
      } catch (const nlohmann::json::exception&) {
        ok = false;
      }
    }
    if (ok && parsed.is_array() && !parsed.empty() &&
        std::all_of(parsed.begin(), parsed.end(),
                    [](const Json& v) { return v.is_object(); })) {
      std::vector<StepEvaluation> evals;
      try {
        for (std::size_t i = 0; i < parsed.size(); ++i) {
          evals.push_back(evaluation_from_object(parsed[i], i));
        }
      } catch (const SchemaViolation& e) {
        // Remember the most plausible array's schema problem; a later
        // array might still be the real one.
        last_schema_error = e.what();
        search = start + 1;
        continue;
      }
      std::stable_sort(evals.begin(), evals.end(),
                       [](const StepEvaluation& a, const StepEvaluation& b) {
                         return a.student_step < b.student_step;
                       });
      return evals;
    }
    search = start + 1;
  }

  if (!last_schema_error.empty()) throw SchemaViolation(last_schema_error);
  throw ParseFailure("no JSON array of evaluation objects found");
}

ValidationReport validate_evaluation(const std::vector<StepEvaluation>& evals,
                                     std::size_t context_sentences,
                                     std::size_t reference_steps,
                                     std::size_t candidate_steps,
                                     const DatasetProfile& profile) {
  ValidationReport report;
  auto violation = [&](const std::string& code, const std::string& detail) {
    report.violations.push_back({code, detail});
  };
  auto warning = [&](const std::string& code, const std::string& detail) {
    report.warnings.push_back({code, detail});
  };

  std::set<int> seen;
  for (const auto& e : evals) {
    if (e.student_step < 1 ||
        e.student_step > static_cast<int>(candidate_steps)) {
      violation("step_out_of_range",
                "student_step " + std::to_string(e.student_step) +
                    " outside 1.." + std::to_string(candidate_steps));
      continue;
    }
    if (!seen.insert(e.student_step).second) {
      violation("duplicate_step", "student_step " +
                                      std::to_string(e.student_step) +
                                      " evaluated more than once");
    }
  }
  for (int i = 1; i <= static_cast<int>(candidate_steps); ++i) {
    if (seen.count(i) == 0) {
      violation("missing_step",
                "no evaluation for student_step " + std::to_string(i));
    }
  }

  for (const auto& e : evals) {
    std::string at = "step " + std::to_string(e.student_step);
    for (int idx : e.question_sentences) {
      if (idx < 1 || idx > static_cast<int>(context_sentences)) {
        violation("context_index_out_of_range",
                  at + ": question sentence " + std::to_string(idx) +
                      " outside 1.." + std::to_string(context_sentences));
      }
    }
    for (int idx : e.matching_reference_steps) {
      if (idx < 1 || idx > static_cast<int>(reference_steps)) {
        violation("reference_index_out_of_range",
                  at + ": reference step " + std::to_string(idx) +
                      " outside 1.." + std::to_string(reference_steps));
      }
    }
    for (int idx : e.student_combining_steps) {
      if (idx < 1 || idx > static_cast<int>(candidate_steps)) {
        violation("combining_index_out_of_range",
                  at + ": combining step " + std::to_string(idx) +
                      " outside 1.." + std::to_string(candidate_steps));
      } else if (idx == e.student_step) {
        violation("self_reference",
                  at + ": student_combining_steps contains the step itself");
      }
    }
    for (const auto& category : e.error_category) {
      if (!profile.has_error_category(category)) {
        violation("unknown_error_category",
                  at + ": '" + category + "' is not in profile '" +
                      profile.name + "'");
      }
    }
    if (e.label_correct && !e.error_category.empty()) {
      violation("category_on_correct_step",
                at + ": error_category must be empty when label is CORRECT");
    }
    if (!e.label_correct && e.error_category.empty()) {
      warning("incorrect_without_category",
              at + ": INCORRECT step carries no error category");
    }
    if (e.student_combining_steps.size() >= 2 &&
        e.question_sentences.empty() && e.matching_reference_steps.empty()) {
      warning("unanchored_combination",
              at + ": combines other steps without any reference or "
                   "question anchor");
    }
  }
  return report;
}

ValidationReport validate_evaluation(const std::vector<StepEvaluation>& evals,
                                     const Problem& problem,
                                     const Candidate& candidate,
                                     const DatasetProfile& profile) {
  return validate_evaluation(evals, problem.context_size(),
                             problem.reference_size(), candidate.step_count(),
                             profile);
}

Json evaluation_to_json(const StepEvaluation& e) {
  Json j;
  j["student_step"] = e.student_step;
  j["reasoning"] = e.reasoning;
  j["question_sentences"] = e.question_sentences;
  j["student_combining_steps"] = e.student_combining_steps;
  j["matching_reference_steps"] = e.matching_reference_steps;
  j["error_category"] = e.error_category;
  j["label"] = e.label_correct ? "CORRECT" : "INCORRECT";
  return j;
}

StepEvaluation evaluation_from_json(const Json& j) {
  return evaluation_from_object(j, 0);
}

Json annotation_to_json(const ProcessAnnotation& a) {
  Json j;
  j["problem_id"] = a.problem_id;
  j["sample_index"] = a.sample_index;
  j["status"] = a.status;
  j["outcome"] = a.outcome.correct ? "correct" : "incorrect";
  j["mean_score"] = a.mean_score;
  Json evals = Json::array();
  for (const auto& e : a.evaluations) evals.push_back(evaluation_to_json(e));
  j["evaluations"] = std::move(evals);
  j["provenance"] = Json{{"judge_model", a.provenance.judge_model},
                         {"prompt_digest", a.provenance.prompt_digest},
                         {"attempts", a.provenance.attempts}};
  if (!a.diagnostics.empty()) j["diagnostics"] = a.diagnostics;
  return j;
}

ProcessAnnotation annotation_from_json(const Json& j) {
  ProcessAnnotation a;
  a.problem_id = j.at("problem_id").get<std::string>();
  a.sample_index = j.at("sample_index").get<int>();
  a.status = j.at("status").get<std::string>();
  a.outcome.correct = j.at("outcome").get<std::string>() == "correct";
  a.mean_score = j.at("mean_score").get<double>();
  for (const auto& e : j.at("evaluations")) {
    a.evaluations.push_back(evaluation_from_json(e));
  }
  const Json& prov = j.at("provenance");
  a.provenance.judge_model = prov.value("judge_model", std::string{});
  a.provenance.prompt_digest = prov.value("prompt_digest", std::string{});
  a.provenance.attempts = prov.value("attempts", 0);
  a.diagnostics = j.value("diagnostics", std::string{});
  return a;
}

ProcessAnnotation annotate_candidate(const Problem& problem,
                                     const Candidate& candidate,
                                     const JudgeContext& context) {
  ProcessAnnotation annotation;
  annotation.problem_id = problem.id;
  annotation.sample_index = candidate.decoding.sample_index;
  annotation.outcome =
      outcome_label(candidate.extracted_answer, problem.gold_answer);
  annotation.provenance.judge_model = context.gateway->endpoint().model;

  const DatasetProfile& profile = get_profile(problem.profile);

  std::vector<Exemplar> exemplars;
  try {
    std::uint64_t draw_seed = mix_seed(
        context.seed,
        problem.id + "#" + std::to_string(candidate.decoding.sample_index));
    exemplars = select_exemplars(*context.pool, context.exemplar_count,
                                 draw_seed, {problem.id},
                                 BalancePolicy::balanced);
  } catch (const Error& e) {
    annotation.status = "failed";
    annotation.diagnostics = e.what();
    return annotation;
  }

  ChatRequest base = build_evaluation_prompt(
      context.guidelines, exemplars, problem, candidate,
      context.gateway->endpoint().model, context.decoding);
  annotation.provenance.prompt_digest = cache_key(base);

  std::string last_failure;
  int budget = context.attempt_budget < 1 ? 1 : context.attempt_budget;
  for (int attempt = 1; attempt <= budget; ++attempt) {
    annotation.provenance.attempts = attempt;
    ChatRequest request = base;
    if (attempt > 1) {
      request.decoding.temperature = context.retry_temperature;
      request.messages.push_back(
          {"user",
           "Your previous evaluation was rejected: " + last_failure +
               ". Re-emit the complete JSON array of step evaluations, one "
               "object per student step, following the required schema."});
    }

    std::string reply;
    try {
      ChatResponse response = context.gateway->complete(request);
      if (response.choices.empty()) {
        last_failure = "backend returned no choices";
        continue;
      }
      reply = response.choices.front();
    } catch (const Error& e) {
      annotation.status = "failed";
      annotation.diagnostics = e.what();
      return annotation;
    }

    try {
      auto evals = parse_evaluation(reply, profile);
      ValidationReport report =
          validate_evaluation(evals, problem, candidate, profile);
      if (!report.valid()) {
        last_failure = report.summary();
        continue;
      }
      annotation.evaluations = std::move(evals);
      std::vector<int> labels;
      for (const auto& e : annotation.evaluations) {
        labels.push_back(e.signed_label());
      }
      annotation.mean_score = mean_step_score(labels);
      annotation.status = "ok";
      return annotation;
    } catch (const Error& e) {
      last_failure = e.what();
    }
  }

  annotation.status = "failed";
  annotation.diagnostics = last_failure;
  return annotation;
}

TokenCost token_cost(const Problem& problem, const Candidate& candidate,
                     const ChatRequest& prompt) {
  (void)problem;
  // ~40 whitespace tokens per evaluation object is a serviceable estimate
  // for budgeting; actual usage is recorded from backend replies.
  constexpr long kTokensPerEvaluation = 40;
  TokenCost cost;
  cost.prompt_tokens = prompt_token_count(prompt.messages);
  cost.completion_tokens_estimate =
      kTokensPerEvaluation * static_cast<long>(candidate.step_count());
  return cost;
}

}  // namespace spare
