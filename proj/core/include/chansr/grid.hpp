// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "chansr/error.hpp"

namespace chansr {

struct Shape4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

/// Dense N x C x H x W grid, channel-major and row-major within a plane.
///
/// This is the value carrier for every tensor in the model; gradients are
/// held in separate grids of the same shape.
template <typename T>
class BasicGrid {
 public:
  using value_type = T;

  BasicGrid() = default;
  explicit BasicGrid(Shape4 shape, T fill = T{})
      : shape_(shape), values_(shape.count(), fill) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
      throw ShapeError("negative grid dimension " + shape.str());
    }
  }
  BasicGrid(int n, int c, int h, int w, T fill = T{})
      : BasicGrid(Shape4{n, c, h, w}, fill) {}

  const Shape4& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  std::size_t index(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) *
               shape_.w +
           x;
  }
  T& operator()(int n, int c, int y, int x) { return values_[index(n, c, y, x)]; }
  const T& operator()(int n, int c, int y, int x) const {
    return values_[index(n, c, y, x)];
  }

  std::span<T> plane(int n, int c) {
    return {values_.data() + index(n, c, 0, 0), shape_.plane()};
  }
  std::span<const T> plane(int n, int c) const {
    return {values_.data() + index(n, c, 0, 0), shape_.plane()};
  }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  bool operator==(const BasicGrid&) const = default;

  template <typename U>
  BasicGrid<U> cast() const {
    BasicGrid<U> out(shape_);
    for (std::size_t i = 0; i < values_.size(); ++i) {
      out.data()[i] = static_cast<U>(values_[i]);
    }
    return out;
  }

 private:
  Shape4 shape_{};
  std::vector<T> values_;
};

using Grid4 = BasicGrid<float>;
using Grid4d = BasicGrid<double>;

template <typename T>
bool all_finite(const BasicGrid<T>& g) {
  for (T v : g.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
void require_finite(const BasicGrid<T>& g, const std::string& what) {
  if (!all_finite(g)) throw NonFiniteError("non-finite values in " + what);
}

inline void require_same_shape(const Shape4& a, const Shape4& b,
                               const std::string& what) {
  if (!(a == b)) {
    throw ShapeError(what + ": shape " + a.str() + " vs " + b.str());
  }
}

}  // namespace chansr
