#include "spare/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace spare {

Aggregation aggregation_from_string(const std::string& name) {
  if (name == "min") return Aggregation::min;
  if (name == "prod") return Aggregation::prod;
  if (name == "last") return Aggregation::last;
  if (name == "max") return Aggregation::max;
  throw ConfigError({"unknown aggregation '" + name + "'"});
}

std::string to_string(Aggregation aggregation) {
  switch (aggregation) {
    case Aggregation::min:
      return "min";
    case Aggregation::prod:
      return "prod";
    case Aggregation::last:
      return "last";
    case Aggregation::max:
      return "max";
  }
  return "last";
}

double aggregate_step_scores(const std::vector<double>& step_probs,
                             Aggregation strategy) {
  if (step_probs.empty()) {
    throw EmptySequence("aggregate_step_scores over zero probabilities");
  }
  switch (strategy) {
    case Aggregation::min:
      return *std::min_element(step_probs.begin(), step_probs.end());
    case Aggregation::max:
      return *std::max_element(step_probs.begin(), step_probs.end());
    case Aggregation::last:
      return step_probs.back();
    case Aggregation::prod: {
      double log_sum = 0.0;
      for (double p : step_probs) {
        if (p <= 0.0) return 0.0;
        log_sum += std::log(p);
      }
      return std::clamp(std::exp(log_sum), 0.0, 1.0);
    }
  }
  return step_probs.back();
}

namespace {

// Shared group-and-argmax: sums weights per distinct answer and applies
// the lexicographic tie-break.
std::string argmax_answer(
    const std::vector<std::pair<std::string, double>>& weighted) {
  std::map<std::string, double> sums;
  for (const auto& [answer, weight] : weighted) sums[answer] += weight;
  std::string best;
  double best_sum = -std::numeric_limits<double>::infinity();
  for (const auto& [answer, sum] : sums) {  // map order = lexicographic
    if (sum > best_sum) {
      best = answer;
      best_sum = sum;
    }
  }
  return best;
}

}  // namespace

std::string self_consistency(
    const std::vector<std::optional<std::string>>& answers) {
  std::vector<std::pair<std::string, double>> weighted;
  for (const auto& answer : answers) {
    if (answer) weighted.emplace_back(*answer, 1.0);
  }
  if (weighted.empty()) throw NoAnswers("no extracted answers to vote over");
  return argmax_answer(weighted);
}

std::string weighted_vote(const std::vector<ScoredSolution>& scored) {
  std::vector<std::pair<std::string, double>> weighted;
  for (const auto& solution : scored) {
    if (solution.answer) {
      weighted.emplace_back(*solution.answer, solution.solution_score);
    }
  }
  if (weighted.empty()) throw NoAnswers("no extracted answers to vote over");
  return argmax_answer(weighted);
}

std::string best_of_n(const std::vector<ScoredSolution>& scored) {
  const ScoredSolution* best = nullptr;
  for (const auto& solution : scored) {
    if (!solution.answer) continue;
    if (best == nullptr || solution.solution_score > best->solution_score ||
        (solution.solution_score == best->solution_score &&
         solution.sample_index < best->sample_index)) {
      best = &solution;
    }
  }
  if (best == nullptr) throw NoAnswers("no extracted answers to rank");
  return *best->answer;
}

std::vector<double> score_with_backend(const Candidate& candidate,
                                       const ScoringBackend& backend) {
  std::vector<double> probs;
  if (backend.kind == ScoringBackend::Kind::file) {
    auto key = std::make_pair(candidate.problem_id,
                              candidate.decoding.sample_index);
    auto it = backend.file_scores->find(key);
    if (it == backend.file_scores->end()) {
      throw CountMismatch(candidate.step_count(), 0);
    }
    probs = it->second;
  } else {
    probs = backend.gateway->step_scores(candidate.steps, backend.marker);
  }
  if (probs.size() != candidate.step_count()) {
    throw CountMismatch(candidate.step_count(), probs.size());
  }
  for (double p : probs) {
    if (p < 0.0 || p > 1.0) {
      throw MalformedBackendReply("step probability outside [0,1]");
    }
  }
  return probs;
}

Json scored_solution_to_json(const ScoredSolution& solution) {
  Json j;
  j["problem_id"] = solution.problem_id;
  j["sample_index"] = solution.sample_index;
  j["step_probs"] = solution.step_probs;
  j["strategy"] = solution.strategy;
  j["solution_score"] = solution.solution_score;
  return j;
}

ScoredSolution scored_solution_from_json(const Json& j) {
  ScoredSolution solution;
  solution.problem_id = j.at("problem_id").get<std::string>();
  solution.sample_index = j.at("sample_index").get<int>();
  solution.step_probs = j.at("step_probs").get<std::vector<double>>();
  solution.strategy = j.at("strategy").get<std::string>();
  solution.solution_score = j.at("solution_score").get<double>();
  return solution;
}

std::map<std::pair<std::string, int>, std::vector<double>> load_score_file(
    const std::filesystem::path& path) {
  std::map<std::pair<std::string, int>, std::vector<double>> scores;
  for (const auto& row : read_jsonl(path)) {
    auto key = std::make_pair(row.at("problem_id").get<std::string>(),
                              row.at("sample_index").get<int>());
    scores[key] = row.at("step_probs").get<std::vector<double>>();
  }
  return scores;
}

}  // namespace spare
