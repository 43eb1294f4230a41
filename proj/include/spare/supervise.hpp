#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spare/annotate.hpp"
#include "spare/core.hpp"

namespace spare {

// Mean of signed (+1/-1) step labels. Throws EmptyAnnotation.
double mean_step_score(const std::vector<int>& signed_labels);

// The (y, ybar) view of one annotated candidate used for pair building.
struct EffectiveScore {
  int outcome_signed = 0;   // +1 / -1
  double mean_score = 0.0;  // in [-1, 1]
};

struct AnnotatedCandidate {
  int sample_index = 0;
  EffectiveScore score;
};

enum class PairPolicy { spare, outcome };

std::string to_string(PairPolicy policy);
PairPolicy pair_policy_from_string(const std::string& name);

// A chosen/rejected candidate pairing for one problem.
struct PreferencePair {
  std::string problem_id;
  int chosen_index = 0;
  int rejected_index = 0;
  PairPolicy policy = PairPolicy::spare;
  EffectiveScore chosen_score;
  EffectiveScore rejected_score;
};

// spare policy: all (w, l) with y_w = +1, y_l = -1 and ybar_w > ybar_l
// (strict; ties are excluded). outcome policy drops the ybar condition.
// Deduplicated, ordered by (chosen, rejected) index; when the full set
// exceeds cap it is subsampled uniformly under seed.
std::vector<PreferencePair> build_preference_pairs(
    const std::string& problem_id,
    const std::vector<AnnotatedCandidate>& candidates, PairPolicy policy,
    std::size_t cap = 0,  // 0 = unlimited
    std::uint64_t seed = 0);

// Stepwise cross-entropy over binary labels and step probabilities
// (clamped to (0,1) at 1e-12). The oracle for validating external PRM
// trainers. Throws LengthMismatch.
double prm_loss(const std::vector<int>& binary_labels,
                const std::vector<double>& step_probs);

// Equal numbers of positive and negative annotations, uniform without
// replacement, reproducible under seed; result ordered by
// (problem_id, sample_index). Throws InsufficientClass.
std::vector<ProcessAnnotation> balanced_sample(
    const std::vector<ProcessAnnotation>& pool, std::size_t per_class,
    std::uint64_t seed);

// Context rendering plus candidate steps, each terminated by the
// end-of-step marker at which a PRM reads its step probability.
struct PrmTrainingRecord {
  std::string problem_id;
  int sample_index = 0;
  std::string text_with_markers;
  std::vector<int> labels;  // binary, one per marker
};

PrmTrainingRecord make_prm_record(const Problem& problem,
                                  const Candidate& candidate,
                                  const ProcessAnnotation& annotation,
                                  const std::string& marker);

struct PairRow {
  std::string problem_id;
  std::string prompt;
  std::string chosen;
  std::string rejected;
  PairPolicy policy = PairPolicy::spare;
  EffectiveScore chosen_score;
  EffectiveScore rejected_score;
};

// pairs.jsonl {problem_id, prompt, chosen, rejected, policy, scores} and
// prm_train.jsonl {problem_id, sample_index, text_with_markers, labels}.
// Byte-stable for identical inputs.
Json pair_row_to_json(const PairRow& row);
Json prm_record_to_json(const PrmTrainingRecord& record);
void export_pair_rows(const std::filesystem::path& path,
                      const std::vector<PairRow>& rows);
void export_prm_records(const std::filesystem::path& path,
                        const std::vector<PrmTrainingRecord>& records);

}  // namespace spare
