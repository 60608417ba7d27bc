#pragma once

// Dataset ingestion and the CSV interchange formats.
//
// Values file: rows = timestamps, columns = features, optional header row of
// feature names. An empty (or NaN) cell is an unobserved entry.
// Label file: one 0/1 per line. Mask file: same shape as values, 0 = occluded.
//
// Directory layout: every `<entity>.csv` is one entity; companions are
// `<entity>.labels.csv` and `<entity>.mask.csv`.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dghl/detector.hpp"
#include "dghl/series.hpp"

namespace dghl {

SeriesFrame read_values_csv(std::istream& in, const std::string& source = "<stream>");
std::vector<bool> read_labels(std::istream& in, const std::string& source = "<stream>");
Mask read_mask_csv(std::istream& in, std::size_t m, std::size_t length,
                   const std::string& source = "<stream>");

void write_values_csv(std::ostream& out, const SeriesFrame& frame);
void write_labels(std::ostream& out, const std::vector<bool>& labels);

/// Loads one entity file or every entity of a directory (sorted by name).
std::vector<SeriesFrame> load_dataset(const std::filesystem::path& path);

/// Writes `<dir>/<entity>.csv` plus the label file when labels are present.
void write_frame(const std::filesystem::path& dir, const SeriesFrame& frame);

struct StandardizeStats {
  std::vector<double> mean;
  std::vector<double> std_dev;  // floored at 1e-8
};

/// Masked per-feature mean/std from `train`. Throws ValidationError naming the
/// feature when a feature has no observed value.
StandardizeStats fit_standardize(const SeriesFrame& train);
SeriesFrame apply_standardize(const SeriesFrame& frame, const StandardizeStats& stats);
SeriesFrame destandardize(const SeriesFrame& frame, const StandardizeStats& stats);

struct Standardized {
  SeriesFrame train;
  std::vector<SeriesFrame> others;
  StandardizeStats stats;
};
Standardized standardize(const SeriesFrame& train, const std::vector<SeriesFrame>& others);

void write_stats_csv(std::ostream& out, const StandardizeStats& stats);
StandardizeStats read_stats_csv(std::istream& in, const std::string& source = "<stream>");

/// Non-overlapping mean pooling of observed values; labels pooled by OR.
SeriesFrame downsample(const SeriesFrame& frame, std::size_t factor);

/// timestamp,raw_score,normalized_score[,<feature>...]
void write_scores_csv(std::ostream& out, const ScoreSeries& raw, const ScoreSeries& normalized,
                      const std::vector<std::string>& feature_names, bool per_feature);

struct ScoreTable {
  std::vector<double> raw;
  std::vector<double> normalized;
};
ScoreTable read_scores_csv(std::istream& in, const std::string& source = "<stream>");

/// Shortest round-trip decimal text for a double.
std::string format_double(double v);

}  // namespace dghl
