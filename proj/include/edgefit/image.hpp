#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "edgefit/errors.hpp"

namespace edgefit {

struct ImageSize {
  int width = 0;
  int height = 0;
  bool empty() const { return width <= 0 || height <= 0; }
  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Row-major 2D grid. Pixel (x, y) has its centre at integer coordinates.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill) {}
  explicit Image(ImageSize size, T fill = T{}) : Image(size.width, size.height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  ImageSize size() const { return {width_, height_}; }
  bool empty() const { return data_.empty(); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Intensities in [0, 1].
using GrayImage = Image<double>;
using BinaryImage = Image<std::uint8_t>;
using RgbImage = Image<std::array<std::uint8_t, 3>>;

/// Reads binary PGM (P5, 8 or 16 bit) or grayscale/color PNG, normalised to [0, 1].
GrayImage readImage(const std::filesystem::path& path);
/// 8-bit P5 PGM; values are clamped to [0, 1] and rounded.
void writePgm(const GrayImage& image, const std::filesystem::path& path);
/// 16-bit P5 PGM after linear normalisation of finite values to [0, 65535].
void writePgm16Normalized(const Image<double>& field, const std::filesystem::path& path);
void writePpm(const RgbImage& image, const std::filesystem::path& path);
void writePng(const GrayImage& image, const std::filesystem::path& path);

/// Rounds every value to the nearest 8-bit level.
GrayImage quantize8(const GrayImage& image);

}  // namespace edgefit
