#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spare/core.hpp"
#include "spare/gateway.hpp"

namespace spare {

enum class Aggregation { min, prod, last, max };

Aggregation aggregation_from_string(const std::string& name);
std::string to_string(Aggregation aggregation);

// Collapse per-step probabilities into one solution score. prod runs in
// log space. Throws EmptySequence.
double aggregate_step_scores(const std::vector<double>& step_probs,
                             Aggregation strategy);

// One candidate ready for voting: its normalized answer (absent answers
// are excluded by the selectors), step probabilities, and the aggregated
// solution score under the tagged strategy.
struct ScoredSolution {
  std::string problem_id;
  int sample_index = 0;
  std::optional<std::string> answer;
  std::vector<double> step_probs;
  double solution_score = 1.0;
  std::string strategy;
};

// Majority answer; ties broken by lexicographically smallest normalized
// answer. Throws NoAnswers when nothing usable remains.
std::string self_consistency(
    const std::vector<std::optional<std::string>>& answers);

// argmax over distinct answers of the summed solution scores (unit scores
// reduce to self-consistency). Same tie-break as self_consistency.
std::string weighted_vote(const std::vector<ScoredSolution>& scored);

// Answer of the single highest-scoring solution; ties broken by lowest
// sample_index.
std::string best_of_n(const std::vector<ScoredSolution>& scored);

// Where step probabilities come from: a scores file keyed by
// (problem_id, sample_index) or a scoring endpoint (logits are sigmoided).
struct ScoringBackend {
  enum class Kind { file, endpoint };
  Kind kind = Kind::endpoint;
  Gateway* gateway = nullptr;   // endpoint
  std::string marker;           // endpoint: end-of-step marker token
  const std::map<std::pair<std::string, int>, std::vector<double>>* file_scores =
      nullptr;                  // file
};

// Exactly n probabilities aligned with the candidate's steps. Throws
// CountMismatch / BackendUnavailable.
std::vector<double> score_with_backend(const Candidate& candidate,
                                       const ScoringBackend& backend);

// scores.jsonl {problem_id, sample_index, step_probs, strategy,
// solution_score}.
Json scored_solution_to_json(const ScoredSolution& solution);
ScoredSolution scored_solution_from_json(const Json& j);

std::map<std::pair<std::string, int>, std::vector<double>> load_score_file(
    const std::filesystem::path& path);

}  // namespace spare
