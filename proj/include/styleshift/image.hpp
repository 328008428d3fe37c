#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace styleshift {

/// Interleaved H x W x C image of doubles, row-major with channels last.
/// Pixel values are nominally in [0, 1]; intermediate results may leave that
/// range until clamp() is applied.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels = 3, double fill = 0.0);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool square() const { return height_ == width_; }

  double& at(int y, int x, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  double at(int y, int x, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  /// Extracts one channel as a row-major H x W plane.
  std::vector<double> channel(int c) const;
  void set_channel(int c, std::span<const double> plane);

  void clamp(double lo = 0.0, double hi = 1.0);
  /// Rounds every value to the nearest multiple of 1/255 (8-bit storage).
  void quantize8();
  std::vector<std::uint8_t> to_bytes() const;
  static Image from_bytes(std::span<const std::uint8_t> bytes, int height,
                          int width, int channels);

  double mean() const;
  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  friend bool operator==(const Image& a, const Image& b) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

double mean_squared_error(const Image& a, const Image& b);

/// Separable resampling with a triangle (bilinear) kernel whose support is
/// widened by the downscale factor, i.e. antialiased bilinear.
Image resize_bilinear(const Image& src, int height, int width);

/// Box-filter downscale followed by nearest-neighbour upscale, as used by
/// the pixelate corruption.
Image resize_box(const Image& src, int height, int width);
Image resize_nearest(const Image& src, int height, int width);

Image flip_horizontal(const Image& src);

/// 8-bit RGB PNG I/O. Values are mapped with value/255 on load and rounded
/// and clamped on save.
Image read_png(const std::string& path);
void write_png(const Image& image, const std::string& path);

}  // namespace styleshift
