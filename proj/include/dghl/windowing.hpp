#pragma once

#include <vector>

#include "dghl/series.hpp"

namespace dghl {

struct WindowingSpec {
  std::size_t window_len = 256;  // s_w
  std::size_t step = 256;        // s

  void validate() const;
};

/// One rolling window. Windows shorter than s_w (series shorter than s_w, or a
/// trailing partial window) are left-padded with zeros; padded columns are
/// unobserved. Column c >= pad holds timestamp start + (c - pad).
struct SeriesWindow {
  Tensor values;  // [m x s_w]
  Mask mask;      // [m x s_w]; series mask with padding cleared
  std::size_t start = 0;
  std::size_t pad = 0;

  std::size_t real_len() const { return values.dim(1) - pad; }
};

/// Windows start at 0, s, 2s, ... until a window reaches the end of the series.
std::vector<SeriesWindow> make_windows(const SeriesFrame& series, const WindowingSpec& spec);

/// Timestamp ranges [begin, end) scored by each window in stream order: window k
/// owns [start_k, start_{k+1}), the last window owns the rest of the series.
struct ScoreBlock {
  std::size_t begin = 0;
  std::size_t end = 0;
};
std::vector<ScoreBlock> score_blocks(std::size_t series_len, const WindowingSpec& spec);

}  // namespace dghl
