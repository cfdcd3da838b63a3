#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "flowdepth/error.hpp"

namespace flowdepth {

/// Dense row-major H x W grid. Elements are addressed as (u, v): u is the
/// column (horizontal pixel coordinate), v the row.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{}) : height_(height), width_(width) {
    if (height < 0 || width < 0) throw DimensionError("grid dimensions must be non-negative");
    data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int u, int v) noexcept { return data_[index(u, v)]; }
  const T& operator()(int u, int v) const noexcept { return data_[index(u, v)]; }

  std::size_t index(int u, int v) const noexcept {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(u);
  }

  std::span<T> row(int v) noexcept { return {data_.data() + index(0, v), static_cast<std::size_t>(width_)}; }
  std::span<const T> row(int v) const noexcept {
    return {data_.data() + index(0, v), static_cast<std::size_t>(width_)};
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  template <class U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  bool operator==(const Grid&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;
using ScalarField = Grid<double>;
/// Per-pixel depth in scene units (D^C, D^G, ground truth).
using DepthMap = Grid<double>;

/// H x W field of pixel displacements stored as two planes, plus validity.
struct FlowField {
  Grid<double> u;
  Grid<double> v;
  Mask valid;

  FlowField() = default;
  FlowField(int height, int width) : u(height, width), v(height, width), valid(height, width, 1) {}

  int height() const noexcept { return u.height(); }
  int width() const noexcept { return u.width(); }
};

/// Planar image with 1 or 3 channels, intensities in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0) {
    if (channels != 1 && channels != 3) throw DimensionError("images have 1 or 3 channels");
    planes_.assign(static_cast<std::size_t>(channels), Grid<double>(height, width, fill));
  }
  explicit Image(Grid<double> gray) { planes_.push_back(std::move(gray)); }

  int channels() const noexcept { return static_cast<int>(planes_.size()); }
  int height() const noexcept { return planes_.empty() ? 0 : planes_.front().height(); }
  int width() const noexcept { return planes_.empty() ? 0 : planes_.front().width(); }

  Grid<double>& channel(int c) noexcept { return planes_[static_cast<std::size_t>(c)]; }
  const Grid<double>& channel(int c) const noexcept { return planes_[static_cast<std::size_t>(c)]; }

  bool in_unit_range() const noexcept {
    for (const auto& p : planes_)
      for (double x : p.values())
        if (!(x >= 0.0 && x <= 1.0)) return false;
    return true;
  }

  bool operator==(const Image&) const = default;

 private:
  std::vector<Grid<double>> planes_;
};

inline long count_true(const Mask& m) {
  return static_cast<long>(std::count_if(m.values().begin(), m.values().end(), [](std::uint8_t x) { return x != 0; }));
}

inline Mask mask_and(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) throw DimensionError("mask shapes differ");
  Mask out(a.height(), a.width());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = (a.data()[i] && b.data()[i]) ? 1 : 0;
  return out;
}

}  // namespace flowdepth
