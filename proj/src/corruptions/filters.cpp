#include "filters.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "styleshift/corruptions.hpp"
#include "styleshift/error.hpp"
#include "styleshift/random.hpp"

namespace styleshift::corruptions {

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

std::vector<double> gaussian_kernel_1d(double sigma) {
  if (!(sigma > 0.0)) return {1.0};
  const int radius = static_cast<int>(4.0 * sigma + 0.5);
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[i + radius] = w;
    total += w;
  }
  for (double& w : k) w /= total;
  return k;
}

Image gaussian_blur(const Image& image, double sigma) {
  const auto kernel = gaussian_kernel_1d(sigma);
  if (kernel.size() == 1) return image;
  const int radius = static_cast<int>(kernel.size() / 2);
  const int h = image.height();
  const int w = image.width();
  const int ch = image.channels();
  Image tmp(h, w, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[k + radius] * image.at(y, reflect_index(x + k, w), c);
        }
        tmp.at(y, x, c) = acc;
      }
    }
  }
  Image out(h, w, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[k + radius] * tmp.at(reflect_index(y + k, h), x, c);
        }
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

Image convolve2d(const Image& image, const Kernel2d& kernel) {
  const int h = image.height();
  const int w = image.width();
  const int ch = image.channels();
  const int r = kernel.radius;
  const int side = 2 * r + 1;
  Image out(h, w, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int ky = -r; ky <= r; ++ky) {
          const int sy = reflect_index(y + ky, h);
          for (int kx = -r; kx <= r; ++kx) {
            const double wgt = kernel.weights[(ky + r) * side + (kx + r)];
            if (wgt == 0.0) continue;
            acc += wgt * image.at(sy, reflect_index(x + kx, w), c);
          }
        }
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

Kernel2d disk_kernel(double radius, double alias_sigma) {
  // Uniform disk resampled onto the pixel grid with a tent (bilinear)
  // footprint, so sub-pixel radii still blur and the kernel widens
  // smoothly with the radius.
  Kernel2d k;
  k.radius = static_cast<int>(std::ceil(radius)) + 1;
  const int side = 2 * k.radius + 1;
  k.weights.assign(static_cast<std::size_t>(side) * side, 0.0);
  constexpr int kSamples = 32;
  double total = 0.0;
  for (int i = 0; i < kSamples; ++i) {
    for (int j = 0; j < kSamples; ++j) {
      const double uy = radius * ((i + 0.5) / kSamples * 2.0 - 1.0);
      const double ux = radius * ((j + 0.5) / kSamples * 2.0 - 1.0);
      if (ux * ux + uy * uy > radius * radius) continue;
      const int y0 = static_cast<int>(std::floor(uy));
      const int x0 = static_cast<int>(std::floor(ux));
      const double fy = uy - y0;
      const double fx = ux - x0;
      const double w[2][2] = {{(1 - fy) * (1 - fx), (1 - fy) * fx}, {fy * (1 - fx), fy * fx}};
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          k.weights[(y0 + a + k.radius) * side + (x0 + b + k.radius)] += w[a][b];
        }
      }
      total += 1.0;
    }
  }
  if (total == 0.0) k.weights[k.radius * side + k.radius] = total = 1.0;
  for (double& v : k.weights) v /= total;
  // Soften the aliased disk edge with a small Gaussian.
  const auto g = gaussian_kernel_1d(alias_sigma);
  if (g.size() > 1) {
    const int gr = static_cast<int>(g.size() / 2);
    std::vector<double> blurred(k.weights.size(), 0.0);
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        double acc = 0.0;
        for (int dy = -gr; dy <= gr; ++dy) {
          for (int dx = -gr; dx <= gr; ++dx) {
            const int sy = y + dy;
            const int sx = x + dx;
            if (sy < 0 || sy >= side || sx < 0 || sx >= side) continue;
            acc += g[dy + gr] * g[dx + gr] * k.weights[sy * side + sx];
          }
        }
        blurred[y * side + x] = acc;
      }
    }
    double s = 0.0;
    for (double v : blurred) s += v;
    for (double& v : blurred) v /= s;
    k.weights = std::move(blurred);
  }
  return k;
}

Image motion_blur(const Image& image, int radius, double sigma, double angle_degrees) {
  const int width = 2 * radius + 1;
  std::vector<double> kernel(width);
  double total = 0.0;
  for (int i = 0; i < width; ++i) {
    kernel[i] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    total += kernel[i];
  }
  for (double& v : kernel) v /= total;

  const double rad = angle_degrees * std::numbers::pi / 180.0;
  const double py = width * std::sin(rad);
  const double px = width * std::cos(rad);
  const double hyp = std::hypot(py, px);
  const int h = image.height();
  const int w = image.width();
  const int ch = image.channels();
  Image out(h, w, ch, 0.0);
  for (int i = 0; i < width; ++i) {
    const int dy = -static_cast<int>(std::ceil(i * py / hyp - 0.5));
    const int dx = -static_cast<int>(std::ceil(i * px / hyp - 0.5));
    if (std::abs(dy) >= h || std::abs(dx) >= w) break;
    for (int y = 0; y < h; ++y) {
      const int sy = std::clamp(y - dy, 0, h - 1);
      for (int x = 0; x < w; ++x) {
        const int sx = std::clamp(x - dx, 0, w - 1);
        for (int c = 0; c < ch; ++c) out.at(y, x, c) += kernel[i] * image.at(sy, sx, c);
      }
    }
  }
  return out;
}

Image clipped_zoom(const Image& image, double zoom) {
  const int h = image.height();
  const int w = image.width();
  const int ch = image.channels();
  Image out(h, w, ch);
  for (int y = 0; y < h; ++y) {
    const double sy = std::clamp((y + 0.5 - h / 2.0) / zoom + h / 2.0 - 0.5, 0.0, h - 1.0);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - y0;
    for (int x = 0; x < w; ++x) {
      const double sx = std::clamp((x + 0.5 - w / 2.0) / zoom + w / 2.0 - 0.5, 0.0, w - 1.0);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - x0;
      for (int c = 0; c < ch; ++c) {
        const double top = (1 - fx) * image.at(y0, x0, c) + fx * image.at(y0, x1, c);
        const double bottom = (1 - fx) * image.at(y1, x0, c) + fx * image.at(y1, x1, c);
        out.at(y, x, c) = (1 - fy) * top + fy * bottom;
      }
    }
  }
  return out;
}

std::vector<double> plasma_fractal(int size, double wibble_decay, std::uint64_t seed) {
  if (size < 2 || (size & (size - 1)) != 0) {
    throw Error("corruption.plasma", "plasma size must be a power of two >= 2");
  }
  Rng rng(seed);
  std::vector<double> map(static_cast<std::size_t>(size) * size, 0.0);
  auto at = [&](int r, int c) -> double& {
    r = ((r % size) + size) % size;
    c = ((c % size) + size) % size;
    return map[static_cast<std::size_t>(r) * size + c];
  };
  double wibble = 100.0;
  auto wibbled_mean = [&](double sum) { return sum / 4.0 + wibble * rng.uniform(-wibble, wibble); };

  for (int step = size; step >= 2; step /= 2) {
    const int half = step / 2;
    // Squares: centers from the four surrounding corners.
    for (int r = 0; r < size; r += step) {
      for (int c = 0; c < size; c += step) {
        const double sum = at(r, c) + at(r + step, c) + at(r, c + step) + at(r + step, c + step);
        at(r + half, c + half) = wibbled_mean(sum);
      }
    }
    // Diamonds: edge midpoints from their two corners and two centers.
    for (int r = 0; r < size; r += step) {
      for (int c = 0; c < size; c += step) {
        const double sum = at(r + half, c + half) + at(r - half, c + half) + at(r, c) +
                           at(r, c + step);
        at(r, c + half) = wibbled_mean(sum);
      }
    }
    for (int r = 0; r < size; r += step) {
      for (int c = 0; c < size; c += step) {
        const double sum = at(r + half, c + half) + at(r + half, c - half) + at(r, c) +
                           at(r + step, c);
        at(r + half, c) = wibbled_mean(sum);
      }
    }
    wibble /= wibble_decay;
  }
  const auto [lo, hi] = std::minmax_element(map.begin(), map.end());
  const double min = *lo;
  const double range = *hi - *lo;
  for (double& v : map) v = range > 0.0 ? (v - min) / range : 0.0;
  return map;
}

int next_power_of_two(int n) {
  int p = 1;
  while (p < n) p *= 2;
  return p;
}

}  // namespace styleshift::corruptions
