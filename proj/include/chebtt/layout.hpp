#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

namespace chebtt {

using Index = Eigen::Index;

// Row-major multi-index layout: the last dimension varies fastest.
inline std::vector<std::size_t> row_major_strides(std::span<const Index> dims) {
  std::vector<std::size_t> strides(dims.size(), 1);
  for (int k = static_cast<int>(dims.size()) - 2; k >= 0; --k)
    strides[static_cast<std::size_t>(k)] =
        strides[static_cast<std::size_t>(k) + 1] * static_cast<std::size_t>(dims[static_cast<std::size_t>(k) + 1]);
  return strides;
}

inline std::size_t flat_index(std::span<const Index> dims, std::span<const Index> multi) {
  std::size_t flat = 0;
  for (std::size_t k = 0; k < dims.size(); ++k)
    flat = flat * static_cast<std::size_t>(dims[k]) + static_cast<std::size_t>(multi[k]);
  return flat;
}

inline void unflatten_index(std::span<const Index> dims, std::size_t flat, std::span<Index> multi) {
  for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
    const auto n = static_cast<std::size_t>(dims[static_cast<std::size_t>(k)]);
    multi[static_cast<std::size_t>(k)] = static_cast<Index>(flat % n);
    flat /= n;
  }
}

inline std::size_t total_size(std::span<const Index> dims) {
  std::size_t total = 1;
  for (Index n : dims) total *= static_cast<std::size_t>(n);
  return total;
}

}  // namespace chebtt
