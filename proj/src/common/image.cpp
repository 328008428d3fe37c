#include "styleshift/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "styleshift/error.hpp"

namespace styleshift {

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels <= 0) {
    throw Error("image.shape", "invalid image shape");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

std::vector<double> Image::channel(int c) const {
  std::vector<double> plane(static_cast<std::size_t>(height_) * width_);
  for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = data_[i * channels_ + c];
  return plane;
}

void Image::set_channel(int c, std::span<const double> plane) {
  for (std::size_t i = 0; i < plane.size(); ++i) data_[i * channels_ + c] = plane[i];
}

void Image::clamp(double lo, double hi) {
  for (double& v : data_) v = std::clamp(v, lo, hi);
}

void Image::quantize8() {
  for (double& v : data_) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

std::vector<std::uint8_t> Image::to_bytes() const {
  std::vector<std::uint8_t> bytes(data_.size());
  for (std::size_t i = 0; i < data_.size(); ++i) {
    bytes[i] = static_cast<std::uint8_t>(std::lround(std::clamp(data_[i], 0.0, 1.0) * 255.0));
  }
  return bytes;
}

Image Image::from_bytes(std::span<const std::uint8_t> bytes, int height, int width,
                        int channels) {
  Image image(height, width, channels);
  if (bytes.size() != image.size()) throw Error("image.shape", "byte count mismatch");
  for (std::size_t i = 0; i < bytes.size(); ++i) image.data_[i] = bytes[i] / 255.0;
  return image;
}

double Image::mean() const {
  if (data_.empty()) return 0.0;
  double sum = 0.0;
  for (double v : data_) sum += v;
  return sum / static_cast<double>(data_.size());
}

double mean_squared_error(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw Error("image.shape", "mse: shape mismatch");
  double sum = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    sum += d * d;
  }
  return da.empty() ? 0.0 : sum / static_cast<double>(da.size());
}

namespace {

struct Taps {
  int first = 0;
  std::vector<double> weights;
};

using Kernel = std::function<double(double)>;

// Precomputes normalized filter taps for one axis, following the usual
// convolution-based resampler: the kernel is stretched by the downscale
// factor so that shrinking averages rather than aliases.
std::vector<Taps> make_taps(int in_size, int out_size, double support,
                            const Kernel& kernel) {
  const double scale = static_cast<double>(in_size) / out_size;
  const double filter_scale = std::max(scale, 1.0);
  const double radius = support * filter_scale;
  std::vector<Taps> taps(out_size);
  for (int i = 0; i < out_size; ++i) {
    const double center = (i + 0.5) * scale;
    const int lo = std::max(static_cast<int>(std::floor(center - radius + 0.5)), 0);
    const int hi = std::min(static_cast<int>(std::floor(center + radius + 0.5)), in_size);
    Taps& t = taps[i];
    t.first = lo;
    double total = 0.0;
    for (int x = lo; x < hi; ++x) {
      const double w = kernel((x - center + 0.5) / filter_scale);
      t.weights.push_back(w);
      total += w;
    }
    if (total > 0.0) {
      for (double& w : t.weights) w /= total;
    }
    if (t.weights.empty()) {
      t.first = std::clamp(static_cast<int>(center), 0, in_size - 1);
      t.weights.push_back(1.0);
    }
  }
  return taps;
}

Image resample(const Image& src, int height, int width, double support,
               const Kernel& kernel) {
  if (height <= 0 || width <= 0) throw Error("image.shape", "resize to empty image");
  if (src.height() == height && src.width() == width) return src;
  const int channels = src.channels();
  const auto xtaps = make_taps(src.width(), width, support, kernel);
  const auto ytaps = make_taps(src.height(), height, support, kernel);

  Image horizontal(src.height(), width, channels);
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < width; ++x) {
      const Taps& t = xtaps[x];
      for (int c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < t.weights.size(); ++k) {
          acc += t.weights[k] * src.at(y, t.first + static_cast<int>(k), c);
        }
        horizontal.at(y, x, c) = acc;
      }
    }
  }
  Image out(height, width, channels);
  for (int y = 0; y < height; ++y) {
    const Taps& t = ytaps[y];
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < t.weights.size(); ++k) {
          acc += t.weights[k] * horizontal.at(t.first + static_cast<int>(k), x, c);
        }
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

}  // namespace

Image resize_bilinear(const Image& src, int height, int width) {
  return resample(src, height, width, 1.0, [](double x) {
    x = std::abs(x);
    return x < 1.0 ? 1.0 - x : 0.0;
  });
}

Image resize_box(const Image& src, int height, int width) {
  return resample(src, height, width, 0.5, [](double x) {
    return (x >= -0.5 && x < 0.5) ? 1.0 : 0.0;
  });
}

Image resize_nearest(const Image& src, int height, int width) {
  Image out(height, width, src.channels());
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(src.height() - 1, static_cast<int>((y + 0.5) * src.height() / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(src.width() - 1, static_cast<int>((x + 0.5) * src.width() / width));
      for (int c = 0; c < src.channels(); ++c) out.at(y, x, c) = src.at(sy, sx, c);
    }
  }
  return out;
}

Image flip_horizontal(const Image& src) {
  Image out(src.height(), src.width(), src.channels());
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      for (int c = 0; c < src.channels(); ++c) {
        out.at(y, src.width() - 1 - x, c) = src.at(y, x, c);
      }
    }
  }
  return out;
}

Image read_png(const std::string& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw Error("png.read", "cannot read PNG '" + path + "': " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    std::string message = png.message;
    png_image_free(&png);
    throw Error("png.read", "cannot decode PNG '" + path + "': " + message);
  }
  return Image::from_bytes(buffer, static_cast<int>(png.height),
                           static_cast<int>(png.width), 3);
}

void write_png(const Image& image, const std::string& path) {
  if (image.channels() != 3) throw Error("png.write", "only RGB images can be written");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = PNG_FORMAT_RGB;
  const auto bytes = image.to_bytes();
  if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw Error("png.write", "cannot write PNG '" + path + "': " + png.message);
  }
}

}  // namespace styleshift
