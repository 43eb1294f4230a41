#include "spare/evalqa.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace spare {

double exact_match(const std::vector<std::string>& predictions,
                   const std::vector<std::string>& golds) {
  if (predictions.size() != golds.size()) {
    throw LengthMismatch(predictions.size(), golds.size());
  }
  if (predictions.empty()) {
    throw EmptyComparison("exact_match over empty lists");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == golds[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

namespace {

std::vector<std::string> whitespace_split(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  std::string token;
  while (in >> token) tokens.push_back(token);
  return tokens;
}

}  // namespace

double answer_f1(const std::string& prediction, const std::string& gold) {
  auto pred_tokens = whitespace_split(prediction);
  auto gold_tokens = whitespace_split(gold);
  if (pred_tokens.empty() || gold_tokens.empty()) {
    return pred_tokens.empty() && gold_tokens.empty() ? 1.0 : 0.0;
  }
  std::map<std::string, long> gold_counts;
  for (const auto& t : gold_tokens) ++gold_counts[t];
  long overlap = 0;
  for (const auto& t : pred_tokens) {
    auto it = gold_counts.find(t);
    if (it != gold_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  double precision =
      static_cast<double>(overlap) / static_cast<double>(pred_tokens.size());
  double recall =
      static_cast<double>(overlap) / static_cast<double>(gold_tokens.size());
  return 2.0 * precision * recall / (precision + recall);
}

double macro_f1(const std::vector<std::string>& predictions,
                const std::vector<std::string>& golds,
                const std::vector<std::string>& label_set) {
  if (predictions.size() != golds.size()) {
    throw LengthMismatch(predictions.size(), golds.size());
  }
  if (predictions.empty()) {
    throw EmptyComparison("macro_f1 over empty lists");
  }
  std::set<std::string> labels(label_set.begin(), label_set.end());
  for (const auto& gold : golds) {
    if (labels.count(gold) == 0) {
      throw UnknownLabel("gold label '" + gold + "' not in label set");
    }
  }

  double f1_sum = 0.0;
  long counted = 0;
  for (const auto& label : label_set) {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
      bool is_gold = golds[i] == label;
      bool is_pred = predictions[i] == label;
      if (is_gold && is_pred) ++tp;
      if (!is_gold && is_pred) ++fp;
      if (is_gold && !is_pred) ++fn;
    }
    if (tp + fp + fn == 0) continue;  // absent from both sides: skipped
    double f1 = tp == 0 ? 0.0
                        : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    f1_sum += f1;
    ++counted;
  }
  if (counted == 0) {
    throw UnknownLabel("no label from the set appears in the data");
  }
  return f1_sum / static_cast<double>(counted);
}

namespace {

AgreementBlock block_from_pairs(const std::vector<LabelPair>& pairs) {
  AgreementBlock block;
  block.total = static_cast<long>(pairs.size());
  if (pairs.empty()) return block;

  // "correct" is the positive class: tp = both say correct.
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tn = 0;
  for (const auto& pair : pairs) {
    if (pair.predicted_correct && pair.human_correct) ++tp;
    if (pair.predicted_correct && !pair.human_correct) ++fp;
    if (!pair.predicted_correct && pair.human_correct) ++fn;
    if (!pair.predicted_correct && !pair.human_correct) ++tn;
  }
  block.accuracy = static_cast<double>(tp + tn) / static_cast<double>(pairs.size());
  block.correct_class.support = tp + fn;
  block.correct_class.precision =
      tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  block.correct_class.recall =
      tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  block.incorrect_class.support = tn + fp;
  block.incorrect_class.precision =
      tn + fn == 0 ? 0.0 : static_cast<double>(tn) / static_cast<double>(tn + fn);
  block.incorrect_class.recall =
      tn + fp == 0 ? 0.0 : static_cast<double>(tn) / static_cast<double>(tn + fp);
  return block;
}

}  // namespace

AgreementReport annotation_agreement(const std::vector<LabelPair>& pairs) {
  if (pairs.empty()) {
    throw EmptyComparison("annotation_agreement over zero pairs");
  }
  std::vector<LabelPair> single;
  std::vector<LabelPair> multi;
  for (const auto& pair : pairs) {
    (is_multi_step(pair.kind) ? multi : single).push_back(pair);
  }
  AgreementReport report;
  report.overall = block_from_pairs(pairs);
  report.single_step = block_from_pairs(single);
  report.multi_step = block_from_pairs(multi);
  return report;
}

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  if (sorted.size() == 1) return sorted.front();
  double pos = q * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

ClassDistribution distribution_for(std::vector<double> scores, int bins) {
  ClassDistribution dist;
  dist.histogram.assign(bins, 0);
  dist.support = static_cast<long>(scores.size());
  if (scores.empty()) return dist;

  double sum = 0.0;
  for (double s : scores) sum += s;
  dist.mean = sum / static_cast<double>(scores.size());
  double var = 0.0;
  for (double s : scores) var += (s - dist.mean) * (s - dist.mean);
  dist.stddev = std::sqrt(var / static_cast<double>(scores.size()));

  std::sort(scores.begin(), scores.end());
  dist.q1 = quantile(scores, 0.25);
  dist.median = quantile(scores, 0.5);
  dist.q3 = quantile(scores, 0.75);

  for (double s : scores) {
    int bin = static_cast<int>(s * bins);
    if (bin >= bins) bin = bins - 1;
    if (bin < 0) bin = 0;
    ++dist.histogram[bin];
  }
  return dist;
}

Json class_distribution_to_json(const ClassDistribution& dist) {
  return Json{{"support", dist.support}, {"mean", dist.mean},
              {"stddev", dist.stddev},   {"q1", dist.q1},
              {"median", dist.median},   {"q3", dist.q3},
              {"histogram", dist.histogram}};
}

Json class_agreement_to_json(const ClassAgreement& a) {
  return Json{{"precision", a.precision},
              {"recall", a.recall},
              {"support", a.support}};
}

Json agreement_block_to_json(const AgreementBlock& block) {
  return Json{{"accuracy", block.accuracy},
              {"total", block.total},
              {"correct", class_agreement_to_json(block.correct_class)},
              {"incorrect", class_agreement_to_json(block.incorrect_class)}};
}

}  // namespace

DistributionSummary score_distribution_summary(
    const std::vector<ScoredOutcome>& scored, int bins) {
  DistributionSummary summary;
  summary.bins = bins < 1 ? 1 : bins;
  std::vector<double> correct;
  std::vector<double> incorrect;
  for (const auto& s : scored) {
    (s.answer_correct ? correct : incorrect).push_back(s.score);
  }
  summary.correct = distribution_for(std::move(correct), summary.bins);
  summary.incorrect = distribution_for(std::move(incorrect), summary.bins);
  return summary;
}

Json agreement_report_to_json(const AgreementReport& report) {
  return Json{{"overall", agreement_block_to_json(report.overall)},
              {"single_step", agreement_block_to_json(report.single_step)},
              {"multi_step", agreement_block_to_json(report.multi_step)}};
}

Json distribution_summary_to_json(const DistributionSummary& summary) {
  return Json{{"bins", summary.bins},
              {"correct", class_distribution_to_json(summary.correct)},
              {"incorrect", class_distribution_to_json(summary.incorrect)}};
}

std::string histogram_csv(const DistributionSummary& summary) {
  std::ostringstream out;
  out << "bin_low,bin_high,correct,incorrect\n";
  for (int i = 0; i < summary.bins; ++i) {
    double lo = static_cast<double>(i) / summary.bins;
    double hi = static_cast<double>(i + 1) / summary.bins;
    out << lo << ',' << hi << ',' << summary.correct.histogram[i] << ','
        << summary.incorrect.histogram[i] << '\n';
  }
  return out.str();
}

}  // namespace spare
