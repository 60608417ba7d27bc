#pragma once

#include <span>

#include "dghl/detector.hpp"
#include "dghl/series.hpp"
#include "dghl/windowing.hpp"

namespace dghl {

/// s_t = mean over observed features of |y_it - mu_i|, mu_i the observed train mean.
ScoreSeries baseline_mean_deviation(const SeriesFrame& train, const SeriesFrame& test);

/// Mean Euclidean distance from each flattened test window to its k nearest
/// training windows, spread over the window's timestamps and averaged where
/// windows overlap. series_len is the length of the test series.
ScoreSeries baseline_knn(std::span<const SeriesWindow> train_windows,
                         std::span<const SeriesWindow> test_windows, std::size_t k,
                         std::size_t series_len);

}  // namespace dghl
