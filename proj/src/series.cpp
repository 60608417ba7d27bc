#include "dghl/series.hpp"

#include <cmath>

#include "dghl/error.hpp"

namespace dghl {

std::size_t Mask::count_observed() const {
  std::size_t n = 0;
  for (auto b : bits_) n += b;
  return n;
}

Mask& Mask::operator&=(const Mask& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw ShapeError("mask &=: " + std::to_string(rows_) + "x" + std::to_string(cols_) + " vs " +
                     std::to_string(other.rows_) + "x" + std::to_string(other.cols_));
  }
  for (std::size_t k = 0; k < bits_.size(); ++k) bits_[k] &= other.bits_[k];
  return *this;
}

void SeriesFrame::validate() const {
  if (values.rank() != 2) throw ValidationError(entity_id + ": values must be a matrix");
  if (mask.rows() != values.dim(0) || mask.cols() != values.dim(1)) {
    throw ValidationError(entity_id + ": mask shape does not match values");
  }
  if (labels && labels->size() != length()) {
    throw ValidationError(entity_id + ": " + std::to_string(labels->size()) + " labels for " +
                          std::to_string(length()) + " timestamps");
  }
  if (!feature_names.empty() && feature_names.size() != n_features()) {
    throw ValidationError(entity_id + ": feature name count does not match features");
  }
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (mask.flat(k) && !std::isfinite(values[k])) {
      throw ValidationError(entity_id + ": non-finite observed value at feature " +
                            std::to_string(k / length()) + ", t=" + std::to_string(k % length()));
    }
  }
}

SeriesFrame SeriesFrame::from_values(Tensor values, std::string entity_id) {
  SeriesFrame f;
  f.mask = Mask(values.dim(0), values.dim(1), true);
  f.values = std::move(values);
  f.entity_id = std::move(entity_id);
  return f;
}

}  // namespace dghl
