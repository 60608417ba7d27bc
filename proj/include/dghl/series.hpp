#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dghl/tensor.hpp"

namespace dghl {

/// Boolean m x T observation mask; true = observed.
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t rows, std::size_t cols, bool value = true)
      : rows_(rows), cols_(cols), bits_(rows * cols, value ? 1 : 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return bits_.size(); }

  bool operator()(std::size_t i, std::size_t t) const { return bits_[i * cols_ + t] != 0; }
  void set(std::size_t i, std::size_t t, bool v) { bits_[i * cols_ + t] = v ? 1 : 0; }
  bool flat(std::size_t k) const { return bits_[k] != 0; }

  std::size_t count_observed() const;
  Mask& operator&=(const Mask& other);

  bool operator==(const Mask&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// A multivariate series: m features x T timestamps.
struct SeriesFrame {
  Tensor values;  // [m x T]; entries at unobserved positions are 0
  Mask mask;      // [m x T]
  std::optional<std::vector<bool>> labels;
  std::string entity_id;
  std::vector<std::string> feature_names;

  std::size_t n_features() const { return values.rank() == 2 ? values.dim(0) : 0; }
  std::size_t length() const { return values.rank() == 2 ? values.dim(1) : 0; }

  // Throws ValidationError when shapes disagree or observed values are not finite.
  void validate() const;

  static SeriesFrame from_values(Tensor values, std::string entity_id = "series");
};

}  // namespace dghl
