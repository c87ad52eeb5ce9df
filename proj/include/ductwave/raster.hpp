#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ductwave/errors.hpp"

namespace ductwave {

/// Row-major single-precision image. For dataset rasters rows index altitude
/// (row 0 at the surface) and columns index range.
class Raster {
 public:
  Raster() = default;
  Raster(std::size_t rows, std::size_t cols, float fill = 0.0F)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Raster(std::size_t rows, std::size_t cols, std::vector<float> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw InvalidInputError("raster data size does not match its shape");
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Raster& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }

  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  bool operator==(const Raster&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

inline constexpr std::size_t kImageSize = 256;

}  // namespace ductwave
