#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spare/jsonl.hpp"
#include "spare/profiles.hpp"

namespace spare {

// A task instance: s numbered context sentences, an m-step reference
// solution, and the gold answer in raw and normalized form. Immutable after
// construction; all operations on it are pure.
struct Problem {
  std::string id;
  std::vector<std::string> context;    // 1-based indices when rendered
  std::vector<std::string> reference;  // 1-based indices when rendered
  std::string gold_answer_raw;
  std::string gold_answer;  // normalized via the profile pipeline
  std::string profile;

  std::size_t context_size() const { return context.size(); }
  std::size_t reference_size() const { return reference.size(); }
};

struct Decoding {
  double temperature = 1.0;
  std::uint64_t seed = 0;
  int sample_index = 0;
};

// One sampled solution, segmented into n steps.
struct Candidate {
  std::string problem_id;
  std::vector<std::string> steps;
  std::string raw_text;
  Decoding decoding;
  std::optional<std::string> extracted_raw;
  std::optional<std::string> extracted_answer;  // normalized

  std::size_t step_count() const { return steps.size(); }
};

// Final-answer correctness with both numeric views: signed (+1/-1) for
// mean aggregation and binary (1/0) for the PRM loss.
struct OutcomeLabel {
  bool correct = false;

  int signed_value() const { return correct ? +1 : -1; }
  int binary_value() const { return correct ? 1 : 0; }
  static OutcomeLabel from_signed(int s) { return OutcomeLabel{s > 0}; }
};

// Split raw text into non-empty steps. Default policy is newline splitting
// with blank-line collapsing; profiles may override with a regex pattern.
// Throws EmptyOutput when nothing survives trimming.
std::vector<std::string> segment_steps(const std::string& raw_text,
                                       const std::string& split_pattern = "");

// Apply the profile's normalizer pipeline until fixpoint. Idempotent by
// construction: normalize(normalize(x)) == normalize(x).
std::string normalize_answer(const std::string& raw,
                             const DatasetProfile& profile);

// Pull the final answer out of a candidate's last step per the profile's
// marker rule. Absence is a value, not an error.
std::optional<std::string> extract_answer_text(const std::string& final_step,
                                               const DatasetProfile& profile);
std::optional<std::string> extract_answer(const Candidate& candidate,
                                          const DatasetProfile& profile);

// Correct iff the normalized strings are equal; a missing candidate answer
// is incorrect.
OutcomeLabel outcome_label(const std::optional<std::string>& candidate_answer,
                           const std::string& gold_answer);

// Segment + extract in one go; the only constructor used by the pipeline.
Candidate make_candidate(const std::string& problem_id,
                         const std::string& raw_text, const Decoding& decoding,
                         const DatasetProfile& profile);

// problems.jsonl / candidates.jsonl schemas.
Json problem_to_json(const Problem& p);
Problem problem_from_json(const Json& j);
Json candidate_to_json(const Candidate& c);
Candidate candidate_from_json(const Json& j);

// Validates invariants (s >= 1, m >= 1, non-empty id) and normalizes the
// gold answer. Used by the ingest stage.
Problem make_problem(const Json& raw);

}  // namespace spare
