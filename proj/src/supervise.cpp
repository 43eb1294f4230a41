#include "spare/supervise.hpp"

#include <algorithm>
#include <cmath>

#include "spare/judge.hpp"
#include "spare/rng.hpp"

namespace spare {

double mean_step_score(const std::vector<int>& signed_labels) {
  if (signed_labels.empty()) {
    throw EmptyAnnotation("mean_step_score over zero steps");
  }
  double sum = 0.0;
  for (int label : signed_labels) sum += label;
  return sum / static_cast<double>(signed_labels.size());
}

std::string to_string(PairPolicy policy) {
  return policy == PairPolicy::spare ? "spare" : "outcome";
}

PairPolicy pair_policy_from_string(const std::string& name) {
  if (name == "spare") return PairPolicy::spare;
  if (name == "outcome") return PairPolicy::outcome;
  throw ConfigError({"unknown pair policy '" + name + "'"});
}

std::vector<PreferencePair> build_preference_pairs(
    const std::string& problem_id,
    const std::vector<AnnotatedCandidate>& candidates, PairPolicy policy,
    std::size_t cap, std::uint64_t seed) {
  std::vector<const AnnotatedCandidate*> winners;
  std::vector<const AnnotatedCandidate*> losers;
  for (const auto& c : candidates) {
    if (c.score.outcome_signed > 0) {
      winners.push_back(&c);
    } else {
      losers.push_back(&c);
    }
  }

  std::vector<PreferencePair> pairs;
  for (const auto* w : winners) {
    for (const auto* l : losers) {
      if (policy == PairPolicy::spare &&
          !(w->score.mean_score > l->score.mean_score)) {
        continue;
      }
      PreferencePair pair;
      pair.problem_id = problem_id;
      pair.chosen_index = w->sample_index;
      pair.rejected_index = l->sample_index;
      pair.policy = policy;
      pair.chosen_score = w->score;
      pair.rejected_score = l->score;
      pairs.push_back(pair);
    }
  }

  std::sort(pairs.begin(), pairs.end(),
            [](const PreferencePair& a, const PreferencePair& b) {
              if (a.chosen_index != b.chosen_index) {
                return a.chosen_index < b.chosen_index;
              }
              return a.rejected_index < b.rejected_index;
            });
  pairs.erase(std::unique(pairs.begin(), pairs.end(),
                          [](const PreferencePair& a, const PreferencePair& b) {
                            return a.chosen_index == b.chosen_index &&
                                   a.rejected_index == b.rejected_index;
                          }),
              pairs.end());

  if (cap > 0 && pairs.size() > cap) {
    SplitMix64 rng(mix_seed(seed, problem_id));
    portable_shuffle(pairs, rng);
    pairs.resize(cap);
    std::sort(pairs.begin(), pairs.end(),
              [](const PreferencePair& a, const PreferencePair& b) {
                if (a.chosen_index != b.chosen_index) {
                  return a.chosen_index < b.chosen_index;
                }
                return a.rejected_index < b.rejected_index;
              });
  }
  return pairs;
}

double prm_loss(const std::vector<int>& binary_labels,
                const std::vector<double>& step_probs) {
  if (binary_labels.size() != step_probs.size()) {
    throw LengthMismatch(binary_labels.size(), step_probs.size());
  }
  constexpr double kEps = 1e-12;
  double loss = 0.0;
  for (std::size_t i = 0; i < step_probs.size(); ++i) {
    double p = std::clamp(step_probs[i], kEps, 1.0 - kEps);
    double y = binary_labels[i] != 0 ? 1.0 : 0.0;
    loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return loss;
}

std::vector<ProcessAnnotation> balanced_sample(
    const std::vector<ProcessAnnotation>& pool, std::size_t per_class,
    std::uint64_t seed) {
  std::vector<const ProcessAnnotation*> positives;
  std::vector<const ProcessAnnotation*> negatives;
  for (const auto& a : pool) {
    if (!a.ok()) continue;  // failed annotations never reach training data
    (a.outcome.correct ? positives : negatives).push_back(&a);
  }
  if (positives.size() < per_class) {
    throw InsufficientClass("positive", positives.size(), per_class);
  }
  if (negatives.size() < per_class) {
    throw InsufficientClass("negative", negatives.size(), per_class);
  }

  SplitMix64 rng(seed);
  portable_shuffle(positives, rng);
  portable_shuffle(negatives, rng);
  std::vector<const ProcessAnnotation*> chosen;
  chosen.insert(chosen.end(), positives.begin(), positives.begin() + per_class);
  chosen.insert(chosen.end(), negatives.begin(), negatives.begin() + per_class);
  std::sort(chosen.begin(), chosen.end(),
            [](const ProcessAnnotation* a, const ProcessAnnotation* b) {
              if (a->problem_id != b->problem_id) {
                return a->problem_id < b->problem_id;
              }
              return a->sample_index < b->sample_index;
            });

  std::vector<ProcessAnnotation> out;
  out.reserve(chosen.size());
  for (const auto* a : chosen) out.push_back(*a);
  return out;
}

PrmTrainingRecord make_prm_record(const Problem& problem,
                                  const Candidate& candidate,
                                  const ProcessAnnotation& annotation,
                                  const std::string& marker) {
  PrmTrainingRecord record;
  record.problem_id = problem.id;
  record.sample_index = candidate.decoding.sample_index;
  record.text_with_markers = render_context(problem) + "\n";
  for (const auto& step : candidate.steps) {
    record.text_with_markers += step + marker + "\n";
  }
  for (const auto& e : annotation.evaluations) {
    record.labels.push_back(e.binary_label());
  }
  return record;
}

Json pair_row_to_json(const PairRow& row) {
  Json j;
  j["problem_id"] = row.problem_id;
  j["prompt"] = row.prompt;
  j["chosen"] = row.chosen;
  j["rejected"] = row.rejected;
  j["policy"] = to_string(row.policy);
  j["scores"] = Json{
      {"chosen", {{"outcome", row.chosen_score.outcome_signed},
                  {"mean_score", row.chosen_score.mean_score}}},
      {"rejected", {{"outcome", row.rejected_score.outcome_signed},
                    {"mean_score", row.rejected_score.mean_score}}}};
  return j;
}

Json prm_record_to_json(const PrmTrainingRecord& record) {
  Json j;
  j["problem_id"] = record.problem_id;
  j["sample_index"] = record.sample_index;
  j["text_with_markers"] = record.text_with_markers;
  j["labels"] = record.labels;
  return j;
}

void export_pair_rows(const std::filesystem::path& path,
                      const std::vector<PairRow>& rows) {
  std::vector<Json> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(pair_row_to_json(row));
  write_jsonl_atomic(path, out);
}

void export_prm_records(const std::filesystem::path& path,
                        const std::vector<PrmTrainingRecord>& records) {
  std::vector<Json> out;
  out.reserve(records.size());
  for (const auto& record : records) out.push_back(prm_record_to_json(record));
  write_jsonl_atomic(path, out);
}

}  // namespace spare
