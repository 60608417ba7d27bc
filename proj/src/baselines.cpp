#include "dghl/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "dghl/error.hpp"

namespace dghl {

ScoreSeries baseline_mean_deviation(const SeriesFrame& train, const SeriesFrame& test) {
  const std::size_t m = train.n_features();
  if (test.n_features() != m) {
    throw ShapeError("mean deviation: train has " + std::to_string(m) + " features, test has " +
                     std::to_string(test.n_features()));
  }
  std::vector<double> mu(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < train.length(); ++t) {
      if (!train.mask(i, t)) continue;
      acc += train.values.at(i, t);
      ++n;
    }
    mu[i] = n > 0 ? acc / static_cast<double>(n) : 0.0;
  }

  const std::size_t len = test.length();
  ScoreSeries out;
  out.scores.assign(len, 0.0);
  out.per_feature = Tensor({m, len});
  out.coverage.assign(len, 1);
  out.n_scored.assign(len, 0);
  for (std::size_t t = 0; t < len; ++t) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (!test.mask(i, t)) continue;
      const double d = std::abs(test.values.at(i, t) - mu[i]);
      out.per_feature.at(i, t) = d;
      acc += d;
      ++n;
    }
    out.n_scored[t] = n;
    out.scores[t] = n > 0 ? acc / static_cast<double>(n) : 0.0;
  }
  return out;
}

ScoreSeries baseline_knn(std::span<const SeriesWindow> train_windows,
                         std::span<const SeriesWindow> test_windows, std::size_t k,
                         std::size_t series_len) {
  if (k < 1 || k > train_windows.size()) {
    throw ValidationError("knn: k=" + std::to_string(k) + " but " +
                          std::to_string(train_windows.size()) + " training windows");
  }
  std::vector<double> totals(series_len, 0.0);
  std::vector<std::size_t> coverage(series_len, 0);
  std::vector<double> dist(train_windows.size());
  for (const SeriesWindow& w : test_windows) {
    for (std::size_t j = 0; j < train_windows.size(); ++j) {
      require_same_shape(w.values, train_windows[j].values, "knn window");
      double acc = 0.0;
      const auto a = w.values.data();
      const auto b = train_windows[j].values.data();
      for (std::size_t e = 0; e < a.size(); ++e) acc += (a[e] - b[e]) * (a[e] - b[e]);
      dist[j] = std::sqrt(acc);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k), dist.end());
    double score = 0.0;
    for (std::size_t j = 0; j < k; ++j) score += dist[j];
    score /= static_cast<double>(k);
    for (std::size_t c = w.pad; c < w.values.dim(1); ++c) {
      const std::size_t t = w.start + (c - w.pad);
      if (t >= series_len) throw ShapeError("knn: window extends past the series");
      totals[t] += score;
      coverage[t] += 1;
    }
  }
  ScoreSeries out;
  out.scores.assign(series_len, 0.0);
  for (std::size_t t = 0; t < series_len; ++t) {
    if (coverage[t] > 0) out.scores[t] = totals[t] / static_cast<double>(coverage[t]);
  }
  out.coverage = std::move(coverage);
  out.n_scored.assign(series_len, 0);
  return out;
}

}  // namespace dghl
