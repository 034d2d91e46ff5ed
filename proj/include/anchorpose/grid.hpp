#pragma once

#include <cstddef>
#include <vector>

namespace anchorpose {

// Row-major 2D grid; cell (row, col) lives at data[row * width + col].
template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, const T& fill = T{})
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
  const T& at(int row, int col) const {
    return data[static_cast<std::size_t>(row) * width + col];
  }
  std::size_t size() const { return data.size(); }
  bool same_shape(int w, int h) const { return width == w && height == h; }
  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return width == other.width && height == other.height;
  }
};

}  // namespace anchorpose
