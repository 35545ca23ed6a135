#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace iotids::nn {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> extents, double fill = 0.0)
      : shape(std::move(extents)), values(element_count(shape), fill) {}
  Tensor(std::vector<std::size_t> extents, std::vector<double> data)
      : shape(std::move(extents)), values(std::move(data)) {
    if (values.size() != element_count(shape))
      throw std::invalid_argument("Tensor: value count does not match shape");
  }

  static std::size_t element_count(const std::vector<std::size_t>& extents) {
    return std::accumulate(extents.begin(), extents.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t size() const { return values.size(); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

}  // namespace iotids::nn
