#pragma once

#include <array>
#include <cassert>
#include <cstdint>
#include <vector>

namespace cods {

// Row-major 2D grid; (x,y) with x = column.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : w_(width), h_(height), data_(static_cast<size_t>(width) * height, fill) {}

  int width() const { return w_; }
  int height() const { return h_; }
  T& at(int x, int y) { return data_[static_cast<size_t>(y) * w_ + x]; }
  const T& at(int x, int y) const { return data_[static_cast<size_t>(y) * w_ + x]; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < w_ && y >= 0 && y < h_; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Image&) const = default;

 private:
  int w_ = 0, h_ = 0;
  std::vector<T> data_;
};

using Color = std::array<uint8_t, 3>;

}  // namespace cods
