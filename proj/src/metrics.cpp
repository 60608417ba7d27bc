#include "dghl/metrics.hpp"

#include <algorithm>
#include <limits>
#include <utility>

#include "dghl/error.hpp"

namespace dghl {

namespace {

void require_equal_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": " + std::to_string(a) + " predictions/scores vs " +
                     std::to_string(b) + " labels");
  }
}

void fill_ratios(EvalReport& r, std::size_t positives) {
  const double tp = static_cast<double>(r.true_positives);
  const double fp = static_cast<double>(r.false_positives);
  r.false_negatives = positives - r.true_positives;
  r.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
  r.recall = positives > 0 ? tp / static_cast<double>(positives) : 0.0;
  r.f1 = r.precision + r.recall > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
}

}  // namespace

std::vector<bool> point_adjust(const std::vector<bool>& pred, const std::vector<bool>& labels) {
  require_equal_lengths(pred.size(), labels.size(), "point_adjust");
  std::vector<bool> out = pred;
  std::size_t t = 0;
  while (t < labels.size()) {
    if (!labels[t]) {
      ++t;
      continue;
    }
    std::size_t end = t;
    bool hit = false;
    for (; end < labels.size() && labels[end]; ++end) hit = hit || pred[end];
    if (hit) std::fill(out.begin() + static_cast<long>(t), out.begin() + static_cast<long>(end), true);
    t = end;
  }
  return out;
}

EvalReport evaluate_threshold(std::span<const double> scores, const std::vector<bool>& labels,
                              double threshold, bool adjusted) {
  require_equal_lengths(scores.size(), labels.size(), "evaluate_threshold");
  std::vector<bool> pred(scores.size());
  for (std::size_t t = 0; t < scores.size(); ++t) pred[t] = scores[t] >= threshold;
  if (adjusted) pred = point_adjust(pred, labels);
  EvalReport r;
  r.threshold = threshold;
  r.adjusted = adjusted;
  std::size_t positives = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    positives += labels[t];
    if (pred[t] && labels[t]) ++r.true_positives;
    if (pred[t] && !labels[t]) ++r.false_positives;
  }
  fill_ratios(r, positives);
  return r;
}

EvalReport best_f1(std::span<const LabelledScores> series, bool adjusted) {
  // Each point gets the score at which it becomes a predicted positive: its own
  // score, or for adjusted positives the maximum over its segment.
  std::vector<std::pair<double, bool>> items;
  std::size_t positives = 0;
  for (const LabelledScores& s : series) {
    const std::vector<bool>& labels = *s.labels;
    require_equal_lengths(s.scores.size(), labels.size(), "best_f1");
    std::size_t t = 0;
    while (t < labels.size()) {
      if (!labels[t]) {
        items.emplace_back(s.scores[t], false);
        ++t;
        continue;
      }
      std::size_t end = t;
      double seg_max = -std::numeric_limits<double>::infinity();
      while (end < labels.size() && labels[end]) seg_max = std::max(seg_max, s.scores[end++]);
      for (std::size_t u = t; u < end; ++u) {
        items.emplace_back(adjusted ? seg_max : s.scores[u], true);
      }
      positives += end - t;
      t = end;
    }
  }

  EvalReport best;
  best.adjusted = adjusted;
  best.false_negatives = positives;
  if (items.empty()) return best;
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  best.threshold = items.front().first;
  if (positives == 0) return best;

  EvalReport current;
  current.adjusted = adjusted;
  std::size_t i = 0;
  while (i < items.size()) {
    const double value = items[i].first;
    while (i < items.size() && items[i].first == value) {
      if (items[i].second) {
        ++current.true_positives;
      } else {
        ++current.false_positives;
      }
      ++i;
    }
    current.threshold = value;
    fill_ratios(current, positives);
    if (current.f1 > best.f1) best = current;
  }
  return best;
}

EvalReport best_f1(std::span<const double> scores, const std::vector<bool>& labels,
                   bool adjusted) {
  const LabelledScores one{scores, &labels};
  return best_f1(std::span(&one, 1), adjusted);
}

}  // namespace dghl
