#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "voxflood/error.hpp"

namespace voxflood {

struct Index3 {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  friend bool operator==(const Index3&, const Index3&) = default;
  friend Index3 operator+(Index3 a, Index3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Index3 operator-(Index3 a, Index3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
};

struct Dims3 {
  std::int64_t nx = 1;
  std::int64_t ny = 1;
  std::int64_t nz = 1;

  friend bool operator==(const Dims3&, const Dims3&) = default;

  std::size_t count() const { return static_cast<std::size_t>(nx * ny * nz); }
  bool valid() const { return nx >= 1 && ny >= 1 && nz >= 1; }
  bool contains(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < nx && y < ny && z < nz;
  }
  bool contains(Index3 p) const { return contains(p.x, p.y, p.z); }
  std::int64_t max_extent() const { return std::max(nx, std::max(ny, nz)); }
};

struct Pixel {
  std::int64_t x = 0;
  std::int64_t y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

struct Dims2 {
  std::int64_t w = 1;
  std::int64_t h = 1;

  friend bool operator==(const Dims2&, const Dims2&) = default;

  std::size_t count() const { return static_cast<std::size_t>(w * h); }
  bool contains(std::int64_t x, std::int64_t y) const { return x >= 0 && y >= 0 && x < w && y < h; }
  bool contains(Pixel p) const { return contains(p.x, p.y); }
};

std::string to_string(Index3 p);
std::string to_string(Dims3 d);

// Dense 3D grid, x fastest, then y, then z.
template <class T>
class Grid3 {
 public:
  using value_type = T;

  Grid3() = default;
  explicit Grid3(Dims3 dims, T fill = T{}) : dims_(dims), data_(checked_count(dims), fill) {}
  Grid3(Dims3 dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != checked_count(dims_)) {
      throw InputError("grid payload length " + std::to_string(data_.size()) +
                       " does not match dims " + to_string(dims_));
    }
  }

  const Dims3& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t linear(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return static_cast<std::size_t>((z * dims_.ny + y) * dims_.nx + x);
  }
  std::size_t linear(Index3 p) const { return linear(p.x, p.y, p.z); }
  Index3 index_of(std::size_t i) const {
    const auto li = static_cast<std::int64_t>(i);
    return {li % dims_.nx, (li / dims_.nx) % dims_.ny, li / (dims_.nx * dims_.ny)};
  }

  T& operator()(std::int64_t x, std::int64_t y, std::int64_t z) { return data_[linear(x, y, z)]; }
  const T& operator()(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return data_[linear(x, y, z)];
  }
  T& operator[](Index3 p) { return data_[linear(p)]; }
  const T& operator[](Index3 p) const { return data_[linear(p)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T value_or(std::int64_t x, std::int64_t y, std::int64_t z, T fill) const {
    return dims_.contains(x, y, z) ? (*this)(x, y, z) : fill;
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  friend bool operator==(const Grid3&, const Grid3&) = default;

 private:
  static std::size_t checked_count(Dims3 d) {
    if (!d.valid()) throw InputError("grid dims must be >= 1, got " + to_string(d));
    return d.count();
  }

  Dims3 dims_{};
  std::vector<T> data_ = std::vector<T>(1);
};

// Dense 2D grid, x fastest.
template <class T>
class Grid2 {
 public:
  using value_type = T;

  Grid2() = default;
  explicit Grid2(Dims2 dims, T fill = T{}) : dims_(dims), data_(checked_count(dims), fill) {}
  Grid2(Dims2 dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != checked_count(dims_)) {
      throw InputError("image payload length does not match dims");
    }
  }

  const Dims2& dims() const { return dims_; }
  std::int64_t width() const { return dims_.w; }
  std::int64_t height() const { return dims_.h; }
  std::size_t size() const { return data_.size(); }

  std::size_t linear(std::int64_t x, std::int64_t y) const {
    return static_cast<std::size_t>(y * dims_.w + x);
  }
  T& operator()(std::int64_t x, std::int64_t y) { return data_[linear(x, y)]; }
  const T& operator()(std::int64_t x, std::int64_t y) const { return data_[linear(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  friend bool operator==(const Grid2&, const Grid2&) = default;

 private:
  static std::size_t checked_count(Dims2 d) {
    if (d.w < 1 || d.h < 1) throw InputError("image dims must be >= 1");
    return d.count();
  }

  Dims2 dims_{};
  std::vector<T> data_ = std::vector<T>(1);
};

using VoxelVolume = Grid3<float>;
using LabelVolume = Grid3<std::uint32_t>;
// One byte per voxel, 0 or 1.
using BinaryMask3D = Grid3<std::uint8_t>;
using Image2D = Grid2<float>;
using Mask2D = Grid2<std::uint8_t>;
using LabelImage = Grid2<std::uint32_t>;

template <class Range>
std::size_t count_true(const Range& r) {
  std::size_t n = 0;
  for (auto v : r.values()) n += (v != 0);
  return n;
}

}  // namespace voxflood
