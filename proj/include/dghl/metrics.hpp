#pragma once

#include <span>
#include <vector>

namespace dghl {

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double threshold = 0.0;
  bool adjusted = false;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

/// Point adjustment: a labelled anomalous segment with at least one positive
/// prediction becomes fully predicted. Predictions outside segments are kept.
std::vector<bool> point_adjust(const std::vector<bool>& pred, const std::vector<bool>& labels);

/// Precision / recall / F1 of (score >= threshold), optionally point-adjusted.
EvalReport evaluate_threshold(std::span<const double> scores, const std::vector<bool>& labels,
                              double threshold, bool adjusted);

/// Best F1 over all thresholds drawn from the distinct score values. Ties keep
/// the highest threshold. F1 is 0 when there are no positive labels.
EvalReport best_f1(std::span<const double> scores, const std::vector<bool>& labels, bool adjusted);

/// One threshold shared by several series (entities). Segments never span
/// series boundaries.
struct LabelledScores {
  std::span<const double> scores;
  const std::vector<bool>* labels = nullptr;
};
EvalReport best_f1(std::span<const LabelledScores> series, bool adjusted);

}  // namespace dghl
