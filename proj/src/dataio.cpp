#include "dghl/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>

#include "dghl/error.hpp"

namespace dghl {

namespace fs = std::filesystem;

namespace {

constexpr double kStdFloor = 1e-8;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t begin = 0;
  while (true) {
    const std::size_t comma = line.find(',', begin);
    cells.push_back(trim(std::string_view(line).substr(
        begin, comma == std::string::npos ? std::string::npos : comma - begin)));
    if (comma == std::string::npos) break;
    begin = comma + 1;
  }
  return cells;
}

std::optional<double> parse_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

bool is_missing(const std::string& cell) {
  if (cell.empty()) return true;
  std::string lower = cell;
  std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
  return lower == "nan";
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_companion(const std::string& name) {
  return ends_with(name, ".labels.csv") || ends_with(name, ".mask.csv") ||
         ends_with(name, ".scores.csv") || ends_with(name, ".stats.csv") ||
         ends_with(name, ".loss.csv") || ends_with(name, ".forecast.csv") ||
         ends_with(name, ".interpolation.csv");
}

SeriesFrame load_entity(const fs::path& values_path) {
  std::ifstream in = open_input(values_path);
  SeriesFrame frame = read_values_csv(in, values_path.string());
  std::string stem = values_path.filename().string();
  stem = stem.substr(0, stem.size() - 4);
  frame.entity_id = stem;

  const fs::path labels_path = values_path.parent_path() / (stem + ".labels.csv");
  if (fs::exists(labels_path)) {
    std::ifstream lin = open_input(labels_path);
    frame.labels = read_labels(lin, labels_path.string());
  }
  const fs::path mask_path = values_path.parent_path() / (stem + ".mask.csv");
  if (fs::exists(mask_path)) {
    std::ifstream min = open_input(mask_path);
    frame.mask &= read_mask_csv(min, frame.n_features(), frame.length(), mask_path.string());
    for (std::size_t k = 0; k < frame.values.size(); ++k) {
      if (!frame.mask.flat(k)) frame.values[k] = 0.0;
    }
  }
  if (frame.labels && frame.labels->size() != frame.length()) {
    throw ParseError(labels_path.string() + ": " + std::to_string(frame.labels->size()) +
                     " labels for " + std::to_string(frame.length()) + " timestamps");
  }
  return frame;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

SeriesFrame read_values_csv(std::istream& in, const std::string& source) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::vector<std::string> header;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_row(line);
    if (rows.empty() && header.empty()) {
      const bool any_text = std::any_of(cells.begin(), cells.end(), [](const std::string& c) {
        return !is_missing(c) && !parse_number(c);
      });
      if (any_text) {
        header = std::move(cells);
        continue;
      }
    }
    rows.push_back(std::move(cells));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw ParseError(source + ": no data rows");

  const std::size_t m = header.empty() ? rows.front().size() : header.size();
  const std::size_t len = rows.size();
  SeriesFrame frame;
  frame.values = Tensor({m, len});
  frame.mask = Mask(m, len, true);
  frame.feature_names = header;
  frame.entity_id = source;
  for (std::size_t t = 0; t < len; ++t) {
    if (rows[t].size() != m) {
      throw ParseError(source + ":" + std::to_string(line_numbers[t]) + ": expected " +
                       std::to_string(m) + " columns, found " + std::to_string(rows[t].size()));
    }
    for (std::size_t i = 0; i < m; ++i) {
      const std::string& cell = rows[t][i];
      if (is_missing(cell)) {
        frame.mask.set(i, t, false);
        continue;
      }
      const std::optional<double> v = parse_number(cell);
      if (!v || !std::isfinite(*v)) {
        throw ParseError(source + ":" + std::to_string(line_numbers[t]) + ": non-numeric cell '" +
                         cell + "' in column " + std::to_string(i + 1));
      }
      frame.values.at(i, t) = *v;
    }
  }
  return frame;
}

std::vector<bool> read_labels(std::istream& in, const std::string& source) {
  std::vector<bool> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string cell = trim(line);
    if (cell.empty()) continue;
    if (cell == "0" || cell == "1") {
      labels.push_back(cell == "1");
    } else if (labels.empty() && !parse_number(cell)) {
      continue;  // header
    } else {
      throw ParseError(source + ":" + std::to_string(line_no) + ": label must be 0 or 1, got '" +
                       cell + "'");
    }
  }
  return labels;
}

Mask read_mask_csv(std::istream& in, std::size_t m, std::size_t length, const std::string& source) {
  Mask mask(m, length, true);
  std::string line;
  std::size_t line_no = 0;
  std::size_t t = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_row(line);
    if (t == 0 && !cells.empty() && !parse_number(cells.front())) continue;  // header
    if (t >= length || cells.size() != m) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": mask shape does not match " +
                       std::to_string(length) + " x " + std::to_string(m) + " values");
    }
    for (std::size_t i = 0; i < m; ++i) {
      if (cells[i] != "0" && cells[i] != "1") {
        throw ParseError(source + ":" + std::to_string(line_no) + ": mask cell must be 0 or 1");
      }
      mask.set(i, t, cells[i] == "1");
    }
    ++t;
  }
  if (t != length) {
    throw ParseError(source + ": mask has " + std::to_string(t) + " rows, values have " +
                     std::to_string(length));
  }
  return mask;
}

void write_values_csv(std::ostream& out, const SeriesFrame& frame) {
  const std::size_t m = frame.n_features();
  if (!frame.feature_names.empty()) {
    for (std::size_t i = 0; i < m; ++i) out << (i ? "," : "") << frame.feature_names[i];
    out << '\n';
  }
  for (std::size_t t = 0; t < frame.length(); ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      if (i) out << ',';
      if (frame.mask(i, t)) out << format_double(frame.values.at(i, t));
    }
    out << '\n';
  }
}

void write_labels(std::ostream& out, const std::vector<bool>& labels) {
  for (bool l : labels) out << (l ? "1\n" : "0\n");
}

std::vector<SeriesFrame> load_dataset(const fs::path& path) {
  if (!fs::exists(path)) throw ParseError("dataset path does not exist: " + path.string());
  std::vector<SeriesFrame> frames;
  if (fs::is_regular_file(path)) {
    frames.push_back(load_entity(path));
    return frames;
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && ends_with(name, ".csv") && !is_companion(name)) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ParseError("no entity .csv files in " + path.string());
  for (const fs::path& f : files) frames.push_back(load_entity(f));
  return frames;
}

void write_frame(const fs::path& dir, const SeriesFrame& frame) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / (frame.entity_id + ".csv"));
    write_values_csv(out, frame);
    if (!out) throw Error("failed writing " + (dir / (frame.entity_id + ".csv")).string());
  }
  if (frame.labels) {
    std::ofstream out(dir / (frame.entity_id + ".labels.csv"));
    write_labels(out, *frame.labels);
  }
}

StandardizeStats fit_standardize(const SeriesFrame& train) {
  const std::size_t m = train.n_features();
  StandardizeStats stats;
  for (std::size_t i = 0; i < m; ++i) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < train.length(); ++t) {
      if (train.mask(i, t)) {
        sum += train.values.at(i, t);
        ++n;
      }
    }
    if (n == 0) {
      const std::string name =
          i < train.feature_names.size() ? train.feature_names[i] : "#" + std::to_string(i);
      throw ValidationError("standardize: feature " + name + " of '" + train.entity_id +
                            "' has no observed training value");
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t t = 0; t < train.length(); ++t) {
      if (train.mask(i, t)) ss += (train.values.at(i, t) - mean) * (train.values.at(i, t) - mean);
    }
    stats.mean.push_back(mean);
    stats.std_dev.push_back(std::max(std::sqrt(ss / static_cast<double>(n)), kStdFloor));
  }
  return stats;
}

SeriesFrame apply_standardize(const SeriesFrame& frame, const StandardizeStats& stats) {
  if (frame.n_features() != stats.mean.size()) {
    throw ShapeError("standardize: '" + frame.entity_id + "' has " +
                     std::to_string(frame.n_features()) + " features, stats have " +
                     std::to_string(stats.mean.size()));
  }
  SeriesFrame out = frame;
  for (std::size_t i = 0; i < frame.n_features(); ++i) {
    for (std::size_t t = 0; t < frame.length(); ++t) {
      if (frame.mask(i, t)) {
        out.values.at(i, t) = (frame.values.at(i, t) - stats.mean[i]) / stats.std_dev[i];
      }
    }
  }
  return out;
}

SeriesFrame destandardize(const SeriesFrame& frame, const StandardizeStats& stats) {
  SeriesFrame out = frame;
  for (std::size_t i = 0; i < frame.n_features(); ++i) {
    for (std::size_t t = 0; t < frame.length(); ++t) {
      if (frame.mask(i, t)) {
        out.values.at(i, t) = frame.values.at(i, t) * stats.std_dev[i] + stats.mean[i];
      }
    }
  }
  return out;
}

Standardized standardize(const SeriesFrame& train, const std::vector<SeriesFrame>& others) {
  Standardized out;
  out.stats = fit_standardize(train);
  out.train = apply_standardize(train, out.stats);
  for (const SeriesFrame& f : others) out.others.push_back(apply_standardize(f, out.stats));
  return out;
}

void write_stats_csv(std::ostream& out, const StandardizeStats& stats) {
  out << "feature,mean,std\n";
  for (std::size_t i = 0; i < stats.mean.size(); ++i) {
    out << i << ',' << format_double(stats.mean[i]) << ',' << format_double(stats.std_dev[i])
        << '\n';
  }
}

StandardizeStats read_stats_csv(std::istream& in, const std::string& source) {
  StandardizeStats stats;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || trim(line).empty()) continue;
    const std::vector<std::string> cells = split_row(line);
    const auto mean = cells.size() == 3 ? parse_number(cells[1]) : std::nullopt;
    const auto sd = cells.size() == 3 ? parse_number(cells[2]) : std::nullopt;
    if (!mean || !sd) throw ParseError(source + ":" + std::to_string(line_no) + ": bad stats row");
    stats.mean.push_back(*mean);
    stats.std_dev.push_back(*sd);
  }
  return stats;
}

SeriesFrame downsample(const SeriesFrame& frame, std::size_t factor) {
  if (factor < 1) throw ValidationError("downsample: factor must be >= 1");
  if (factor == 1) return frame;
  const std::size_t m = frame.n_features();
  const std::size_t len = (frame.length() + factor - 1) / factor;
  SeriesFrame out;
  out.entity_id = frame.entity_id;
  out.feature_names = frame.feature_names;
  out.values = Tensor({m, len});
  out.mask = Mask(m, len, false);
  for (std::size_t b = 0; b < len; ++b) {
    const std::size_t begin = b * factor;
    const std::size_t end = std::min(begin + factor, frame.length());
    for (std::size_t i = 0; i < m; ++i) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t t = begin; t < end; ++t) {
        if (frame.mask(i, t)) {
          sum += frame.values.at(i, t);
          ++n;
        }
      }
      if (n > 0) {
        out.values.at(i, b) = sum / static_cast<double>(n);
        out.mask.set(i, b, true);
      }
    }
  }
  if (frame.labels) {
    std::vector<bool> labels(len, false);
    for (std::size_t t = 0; t < frame.length(); ++t) {
      if ((*frame.labels)[t]) labels[t / factor] = true;
    }
    out.labels = std::move(labels);
  }
  return out;
}

void write_scores_csv(std::ostream& out, const ScoreSeries& raw, const ScoreSeries& normalized,
                      const std::vector<std::string>& feature_names, bool per_feature) {
  const std::size_t m = raw.per_feature.rank() == 2 ? raw.per_feature.dim(0) : 0;
  out << "timestamp,raw_score,normalized_score";
  if (per_feature) {
    for (std::size_t i = 0; i < m; ++i) {
      out << ',' << (i < feature_names.size() ? feature_names[i] : "f" + std::to_string(i));
    }
  }
  out << '\n';
  for (std::size_t t = 0; t < raw.scores.size(); ++t) {
    out << t << ',' << format_double(raw.scores[t]) << ','
        << format_double(normalized.scores[t]);
    if (per_feature) {
      for (std::size_t i = 0; i < m; ++i) out << ',' << format_double(raw.per_feature.at(i, t));
    }
    out << '\n';
  }
}

ScoreTable read_scores_csv(std::istream& in, const std::string& source) {
  ScoreTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || trim(line).empty()) continue;
    const std::vector<std::string> cells = split_row(line);
    const auto raw = cells.size() >= 3 ? parse_number(cells[1]) : std::nullopt;
    const auto norm = cells.size() >= 3 ? parse_number(cells[2]) : std::nullopt;
    if (!raw || !norm) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": bad score row");
    }
    table.raw.push_back(*raw);
    table.normalized.push_back(*norm);
  }
  return table;
}

}  // namespace dghl
