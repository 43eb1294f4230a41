#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spare/core.hpp"
#include "spare/gateway.hpp"
#include "spare/judge.hpp"

namespace spare {

// One graded step: the judge's explanation, the alignment sets (question
// sentences, other student steps, reference steps), optional error
// categories, and the CORRECT/INCORRECT label.
struct StepEvaluation {
  int student_step = 0;
  std::string reasoning;
  std::vector<int> question_sentences;
  std::vector<int> student_combining_steps;
  std::vector<int> matching_reference_steps;
  std::vector<std::string> error_category;
  bool label_correct = false;

  int signed_label() const { return label_correct ? +1 : -1; }
  int binary_label() const { return label_correct ? 1 : 0; }
  std::size_t alignment_size() const {
    return question_sentences.size() + student_combining_steps.size() +
           matching_reference_steps.size();
  }
};

enum class AlignmentKind {
  one_to_one,
  one_to_many_composite_output,     // one student step covers several anchors
  one_to_many_composite_reference,  // several student steps share anchors
  unaligned,
};

std::string to_string(AlignmentKind kind);

// Pure function of the alignment sets:
//   total 0                  -> unaligned
//   total 1                  -> one_to_one
//   no combining steps, >1   -> one_to_many_composite_output
//   combining steps present  -> one_to_many_composite_reference
AlignmentKind classify_alignment(const StepEvaluation& evaluation);
inline bool is_multi_step(AlignmentKind kind) {
  return kind == AlignmentKind::one_to_many_composite_output ||
         kind == AlignmentKind::one_to_many_composite_reference;
}

struct Violation {
  std::string code;    // e.g. self_reference, missing_step
  std::string detail;  // human-readable specifics
  std::string describe() const { return code + ": " + detail; }
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::vector<Violation> warnings;  // advisory only, never reject
  bool valid() const { return violations.empty(); }
  std::string summary() const;
};

// Extracts the first well-formed JSON array of objects from judge text,
// tolerating code fences, prose around the array, trailing commas, missing
// commas between objects, and labels given as single-element lists.
// Throws ParseFailure / SchemaViolation.
std::vector<StepEvaluation> parse_evaluation(const std::string& raw,
                                             const DatasetProfile& profile);

// Checks coverage of steps 1..n exactly once, index bounds against s/m/n,
// self-references, unknown error categories, and label/category
// consistency. The report is a value; nothing throws.
ValidationReport validate_evaluation(const std::vector<StepEvaluation>& evals,
                                     std::size_t context_sentences,
                                     std::size_t reference_steps,
                                     std::size_t candidate_steps,
                                     const DatasetProfile& profile);
ValidationReport validate_evaluation(const std::vector<StepEvaluation>& evals,
                                     const Problem& problem,
                                     const Candidate& candidate,
                                     const DatasetProfile& profile);

// Canonical JSON form of an evaluation list (used for round-trip checks
// and the annotations artifact).
Json evaluation_to_json(const StepEvaluation& evaluation);
StepEvaluation evaluation_from_json(const Json& j);

struct Provenance {
  std::string judge_model;
  std::string prompt_digest;
  int attempts = 0;
};

// Per-candidate result: exactly n StepEvaluations when status is "ok",
// plus the outcome label y and mean signed step score.
struct ProcessAnnotation {
  std::string problem_id;
  int sample_index = 0;
  std::string status;  // ok | failed
  OutcomeLabel outcome;
  double mean_score = 0.0;
  std::vector<StepEvaluation> evaluations;
  Provenance provenance;
  std::string diagnostics;  // failure detail when status == failed

  bool ok() const { return status == "ok"; }
};

Json annotation_to_json(const ProcessAnnotation& annotation);
ProcessAnnotation annotation_from_json(const Json& j);

struct JudgeContext {
  Gateway* gateway = nullptr;
  SystemGuidelines guidelines;
  const std::vector<Exemplar>* pool = nullptr;
  std::size_t exemplar_count = 5;
  std::uint64_t seed = 0;
  int attempt_budget = 3;       // total judge calls incl. repair retries
  double retry_temperature = 0.3;
  ChatDecoding decoding;        // temperature 0 by default
};

// One judge call plus bounded repair retries. Parse or schema failures
// re-send the prompt with a corrective instruction naming the violations.
// Failure is a status, never an exception, and labels are never fabricated.
ProcessAnnotation annotate_candidate(const Problem& problem,
                                     const Candidate& candidate,
                                     const JudgeContext& context);

struct TokenCost {
  long prompt_tokens = 0;
  long completion_tokens_estimate = 0;
};

// Measured prompt size for the additivity audit, with a per-step estimate
// of the evaluation completion.
TokenCost token_cost(const Problem& problem, const Candidate& candidate,
                     const ChatRequest& prompt);

}  // namespace spare
