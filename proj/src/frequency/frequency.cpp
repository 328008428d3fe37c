#include "styleshift/frequency.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>

#include "styleshift/error.hpp"

namespace styleshift::frequency {

namespace {

using Complex = std::complex<double>;

// In-place 2-D transform on a row-major buffer, rows then columns.
void transform_2d(std::vector<Complex>& data, int height, int width, bool inverse) {
  Eigen::FFT<double> fft;
  std::vector<Complex> in;
  std::vector<Complex> out;

  // A length-1 transform is the identity (and kissfft does not handle it).
  in.resize(width);
  for (int r = 0; r < height && width > 1; ++r) {
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(r) * width, width, in.begin());
    if (inverse) {
      fft.inv(out, in);
    } else {
      fft.fwd(out, in);
    }
    std::copy_n(out.begin(), width, data.begin() + static_cast<std::ptrdiff_t>(r) * width);
  }
  in.resize(height);
  for (int c = 0; c < width && height > 1; ++c) {
    for (int r = 0; r < height; ++r) in[r] = data[static_cast<std::size_t>(r) * width + c];
    if (inverse) {
      fft.inv(out, in);
    } else {
      fft.fwd(out, in);
    }
    for (int r = 0; r < height; ++r) data[static_cast<std::size_t>(r) * width + c] = out[r];
  }
}

void require_square(const Image& image, const char* op) {
  if (!image.square()) {
    throw Error("frequency.shape", std::string(op) + ": image must be square, got " +
                                       std::to_string(image.height()) + "x" +
                                       std::to_string(image.width()));
  }
}

}  // namespace

FrequencyField::FrequencyField(int height, int width)
    : height_(height), width_(width),
      values_(static_cast<std::size_t>(height) * width, Complex(0.0, 0.0)) {}

FrequencyField FrequencyField::forward(const std::vector<double>& plane, int height, int width) {
  std::vector<Complex> data(plane.begin(), plane.end());
  transform_2d(data, height, width, false);
  // Shift so that frequency 0 lands at (height/2, width/2).
  FrequencyField field(height, width);
  for (int r = 0; r < height; ++r) {
    const int sr = (r + height / 2) % height;
    for (int c = 0; c < width; ++c) {
      const int sc = (c + width / 2) % width;
      field.at(sr, sc) = data[static_cast<std::size_t>(r) * width + c];
    }
  }
  return field;
}

std::vector<double> FrequencyField::inverse_real() const {
  std::vector<Complex> data(values_.size());
  for (int r = 0; r < height_; ++r) {
    const int sr = (r + height_ / 2) % height_;
    for (int c = 0; c < width_; ++c) {
      const int sc = (c + width_ / 2) % width_;
      data[static_cast<std::size_t>(r) * width_ + c] = at(sr, sc);
    }
  }
  transform_2d(data, height_, width_, true);
  std::vector<double> plane(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) plane[i] = data[i].real();
  return plane;
}

double FrequencyField::radius(int row, int col) const {
  const double dr = row - center_row();
  const double dc = col - center_col();
  return std::sqrt(dr * dr + dc * dc);
}

LowPassSpec LowPassSpec::for_resolution(int side) {
  return LowPassSpec{60.0 * side / 224.0};
}

std::vector<double> lowpass_plane(const std::vector<double>& plane, int side, double tau) {
  if (!(tau > 0.0)) throw Error("frequency.tau", "low-pass radius must be positive");
  FrequencyField field = FrequencyField::forward(plane, side, side);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      if (!(field.radius(r, c) < tau)) field.at(r, c) = Complex(0.0, 0.0);
    }
  }
  return field.inverse_real();
}

Image lowpass_filter_unclamped(const Image& image, const LowPassSpec& spec) {
  require_square(image, "lowpass_filter");
  Image out(image.height(), image.width(), image.channels());
  for (int c = 0; c < image.channels(); ++c) {
    out.set_channel(c, lowpass_plane(image.channel(c), image.height(), spec.tau));
  }
  return out;
}

Image lowpass_filter(const Image& image, const LowPassSpec& spec) {
  Image out = lowpass_filter_unclamped(image, spec);
  out.clamp();
  return out;
}

RadialSpectrum plane_spectrum(const std::vector<double>& plane, int side) {
  const FrequencyField field = FrequencyField::forward(plane, side, side);
  const double max_radius = field.radius(0, 0);
  const std::size_t bins = static_cast<std::size_t>(std::floor(max_radius)) + 1;
  std::vector<double> magnitude_sum(bins, 0.0);
  RadialSpectrum spectrum;
  spectrum.counts.assign(bins, 0);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const auto bin = static_cast<std::size_t>(std::floor(field.radius(r, c)));
      magnitude_sum[bin] += std::abs(field.at(r, c));
      ++spectrum.counts[bin];
    }
  }
  spectrum.power.assign(bins, 0.0);
  for (std::size_t b = 0; b < bins; ++b) {
    if (spectrum.counts[b] == 0) continue;
    const double mean = magnitude_sum[b] / static_cast<double>(spectrum.counts[b]);
    spectrum.power[b] = mean * mean;
  }
  return spectrum;
}

RadialSpectrum compute_spectrum(const Image& image) {
  require_square(image, "compute_spectrum");
  RadialSpectrum total;
  for (int c = 0; c < image.channels(); ++c) {
    RadialSpectrum s = plane_spectrum(image.channel(c), image.height());
    if (c == 0) {
      total = std::move(s);
    } else {
      for (std::size_t b = 0; b < total.bins(); ++b) total.power[b] += s.power[b];
    }
  }
  for (double& p : total.power) p /= image.channels();
  return total;
}

RadialSpectrum mean_spectrum(const DomainDataset& dataset) {
  if (dataset.empty()) throw Error("frequency.empty", "mean_spectrum: empty dataset");
  const int side = dataset[0].pixels.height();
  RadialSpectrum total;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Image& img = dataset[i].pixels;
    if (img.height() != side || img.width() != side) {
      throw Error("frequency.shape", "mean_spectrum: mixed resolutions at '" +
                                         dataset[i].id + "'");
    }
    RadialSpectrum s = compute_spectrum(img);
    if (i == 0) {
      total = std::move(s);
    } else {
      for (std::size_t b = 0; b < total.bins(); ++b) total.power[b] += s.power[b];
    }
  }
  for (double& p : total.power) p /= static_cast<double>(dataset.size());
  return total;
}

DomainDataset filter_dataset(const DomainDataset& dataset, const LowPassSpec& spec) {
  DomainDataset out(dataset.num_classes(), Domain::filtered, dataset.resolution());
  for (const auto& s : dataset.samples()) {
    ImageSample f = s;
    f.pixels = lowpass_filter(s.pixels, spec);
    f.domain = Domain::filtered;
    f.image_path.clear();
    f.provenance = "lowpass(tau=" + std::to_string(spec.tau) + "):" + s.id;
    out.add(std::move(f));
  }
  return out;
}

}  // namespace styleshift::frequency
