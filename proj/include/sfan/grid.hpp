#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfan/errors.hpp"

namespace sfan {

// Extents of a 3D voxel grid, indexed (z, y, x) with x fastest.
struct Dims3 {
  int z = 0;
  int y = 0;
  int x = 0;

  bool operator==(const Dims3&) const = default;
  std::int64_t count() const {
    return std::int64_t(z) * std::int64_t(y) * std::int64_t(x);
  }
  std::string str() const {
    return "(" + std::to_string(z) + ", " + std::to_string(y) + ", " + std::to_string(x) + ")";
  }
};

template <typename T>
class Grid3 {
 public:
  Grid3() = default;
  explicit Grid3(Dims3 dims, T fill = T{}) : dims_(dims) {
    require(dims.z >= 1 && dims.y >= 1 && dims.x >= 1, Errc::non_3d_data,
            "grid extents must be positive, got " + dims.str());
    data_.assign(static_cast<std::size_t>(dims.count()), fill);
  }
  Grid3(Dims3 dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    require(static_cast<std::int64_t>(data_.size()) == dims.count(), Errc::shape_mismatch,
            "grid payload size does not match extents " + dims.str());
  }

  Dims3 dims() const { return dims_; }
  bool empty() const { return data_.empty(); }
  std::int64_t count() const { return dims_.count(); }

  T& at(int z, int y, int x) { return data_[index(z, y, x)]; }
  const T& at(int z, int y, int x) const { return data_[index(z, y, x)]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  T* slice(int z) { return data_.data() + std::size_t(z) * dims_.y * dims_.x; }
  const T* slice(int z) const { return data_.data() + std::size_t(z) * dims_.y * dims_.x; }

  bool operator==(const Grid3&) const = default;

 private:
  std::size_t index(int z, int y, int x) const {
    return (std::size_t(z) * dims_.y + y) * dims_.x + x;
  }

  Dims3 dims_;
  std::vector<T> data_;
};

}  // namespace sfan
