#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "iotids/matrix.hpp"

namespace iotids {

// Numeric feature matrix with binary labels (0 = normal, 1 = attack).
struct DatasetTable {
  Matrix features;
  std::vector<std::string> feature_names;
  std::vector<int> labels;

  std::size_t rows() const { return features.rows(); }
  std::size_t cols() const { return features.cols(); }

  void validate() const {
    if (features.rows() == 0) throw std::invalid_argument("DatasetTable: no rows");
    if (labels.size() != features.rows())
      throw std::invalid_argument("DatasetTable: label count does not match row count");
    if (feature_names.size() != features.cols())
      throw std::invalid_argument("DatasetTable: feature name count does not match column count");
    for (int y : labels)
      if (y != 0 && y != 1) throw std::invalid_argument("DatasetTable: labels must be 0 or 1");
    if (!features.all_finite()) throw std::invalid_argument("DatasetTable: non-finite feature value");
  }

  DatasetTable subset(std::span<const std::size_t> row_indices) const {
    DatasetTable out;
    out.features = features.take_rows(row_indices);
    out.feature_names = feature_names;
    out.labels.reserve(row_indices.size());
    for (std::size_t r : row_indices) out.labels.push_back(labels[r]);
    return out;
  }

  DatasetTable select_columns(std::span<const std::size_t> col_indices) const {
    DatasetTable out;
    out.features = features.take_cols(col_indices);
    for (std::size_t c : col_indices) out.feature_names.push_back(feature_names.at(c));
    out.labels = labels;
    return out;
  }

  std::size_t positives() const {
    std::size_t n = 0;
    for (int y : labels) n += (y == 1);
    return n;
  }
};

}  // namespace iotids
