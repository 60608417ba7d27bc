#include "dghl/windowing.hpp"

#include "dghl/error.hpp"

namespace dghl {

void WindowingSpec::validate() const {
  if (window_len < 1) throw ValidationError("windowing: window length must be >= 1");
  if (step < 1) throw ValidationError("windowing: step must be >= 1");
}

namespace {

std::vector<std::size_t> window_starts(std::size_t series_len, const WindowingSpec& spec) {
  std::vector<std::size_t> starts;
  for (std::size_t start = 0; start < series_len; start += spec.step) {
    starts.push_back(start);
    if (start + spec.window_len >= series_len) break;
  }
  return starts;
}

}  // namespace

std::vector<SeriesWindow> make_windows(const SeriesFrame& series, const WindowingSpec& spec) {
  spec.validate();
  const std::size_t m = series.n_features();
  const std::size_t len = series.length();
  if (m == 0 || len == 0) {
    throw ValidationError("make_windows: series '" + series.entity_id + "' is empty");
  }
  std::vector<SeriesWindow> out;
  for (std::size_t start : window_starts(len, spec)) {
    SeriesWindow w;
    const std::size_t real = std::min(spec.window_len, len - start);
    w.start = start;
    w.pad = spec.window_len - real;
    w.values = Tensor({m, spec.window_len});
    w.mask = Mask(m, spec.window_len, false);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t c = 0; c < real; ++c) {
        w.values.at(i, w.pad + c) = series.values.at(i, start + c);
        w.mask.set(i, w.pad + c, series.mask(i, start + c));
      }
    }
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<ScoreBlock> score_blocks(std::size_t series_len, const WindowingSpec& spec) {
  const std::vector<std::size_t> starts = window_starts(series_len, spec);
  std::vector<ScoreBlock> blocks;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const std::size_t end = k + 1 < starts.size() ? starts[k + 1] : series_len;
    blocks.push_back({starts[k], end});
  }
  return blocks;
}

}  // namespace dghl
