#pragma once

#include <string>
#include <vector>

#include "spare/annotate.hpp"
#include "spare/jsonl.hpp"

namespace spare {

// Fraction of exact string equalities over normalized answers. Throws
// LengthMismatch on unequal lengths, EmptyComparison on empty input.
double exact_match(const std::vector<std::string>& predictions,
                   const std::vector<std::string>& golds);

// Token-overlap F1 on whitespace tokens of already-normalized strings.
double answer_f1(const std::string& prediction, const std::string& gold);

// Unweighted mean of per-label F1 over label_set. Gold labels must come
// from label_set (UnknownLabel otherwise); stray prediction labels only
// cost their gold label a false negative. Labels absent from both sides
// are skipped.
double macro_f1(const std::vector<std::string>& predictions,
                const std::vector<std::string>& golds,
                const std::vector<std::string>& label_set);

// One (annotation, human) label pair on an aligned step, tagged with the
// step's alignment kind for stratification.
struct LabelPair {
  bool predicted_correct = false;  // the toolkit's step label
  bool human_correct = false;      // the manual label (ground truth)
  AlignmentKind kind = AlignmentKind::one_to_one;
};

struct ClassAgreement {
  double precision = 0.0;
  double recall = 0.0;
  long support = 0;  // human-labeled members of this class
};

struct AgreementBlock {
  double accuracy = 0.0;
  long total = 0;
  ClassAgreement correct_class;
  ClassAgreement incorrect_class;
};

// Accuracy plus class-wise precision/recall, overall and stratified into
// single-step (one_to_one or unaligned) vs multi-step (any one-to-many)
// alignment. Empty strata report zero support without division errors.
struct AgreementReport {
  AgreementBlock overall;
  AgreementBlock single_step;
  AgreementBlock multi_step;
};

AgreementReport annotation_agreement(const std::vector<LabelPair>& pairs);

struct ScoredOutcome {
  double score = 0.0;
  bool answer_correct = false;
};

struct ClassDistribution {
  long support = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  std::vector<long> histogram;  // fixed-width bins over [0, 1]
};

// Solution-score distributions split by answer correctness; the histogram
// table is directly plottable.
struct DistributionSummary {
  int bins = 10;
  ClassDistribution correct;
  ClassDistribution incorrect;
};

DistributionSummary score_distribution_summary(
    const std::vector<ScoredOutcome>& scored, int bins = 10);

Json agreement_report_to_json(const AgreementReport& report);
Json distribution_summary_to_json(const DistributionSummary& summary);
std::string histogram_csv(const DistributionSummary& summary);

}  // namespace spare
