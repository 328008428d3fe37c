#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "styleshift/datamodel.hpp"
#include "styleshift/image.hpp"

namespace styleshift::frequency {

/// DFT of one image channel in DC-centered layout: the zero frequency sits
/// at (size/2, size/2). The forward transform is unnormalized; the inverse
/// carries the 1/(H*W) factor.
class FrequencyField {
 public:
  FrequencyField(int height, int width);

  static FrequencyField forward(const std::vector<double>& plane, int height, int width);
  /// Inverse transform; returns the real part, row-major.
  std::vector<double> inverse_real() const;

  int height() const { return height_; }
  int width() const { return width_; }
  int center_row() const { return height_ / 2; }
  int center_col() const { return width_ / 2; }

  std::complex<double>& at(int row, int col) { return values_[row * width_ + col]; }
  const std::complex<double>& at(int row, int col) const { return values_[row * width_ + col]; }

  /// Distance from the DC bin in frequency pixels.
  double radius(int row, int col) const;

 private:
  int height_;
  int width_;
  std::vector<std::complex<double>> values_;
};

/// Radius of the ideal circular low-pass filter, in frequency pixels.
struct LowPassSpec {
  double tau = 60.0;

  /// 60 at 224x224, scaled linearly with the side length.
  static LowPassSpec for_resolution(int side);
};

/// Squared mean spectral magnitude per integer radius bin [r, r+1).
struct RadialSpectrum {
  std::vector<double> power;
  std::vector<std::size_t> counts;

  std::size_t bins() const { return power.size(); }
};

/// Filters one plane without clamping.
std::vector<double> lowpass_plane(const std::vector<double>& plane, int side, double tau);

/// Per-channel ideal low-pass; values are not clamped.
Image lowpass_filter_unclamped(const Image& image, const LowPassSpec& spec);
Image lowpass_filter(const Image& image, const LowPassSpec& spec);

RadialSpectrum plane_spectrum(const std::vector<double>& plane, int side);
/// Spectrum per channel, averaged bin-wise across channels.
RadialSpectrum compute_spectrum(const Image& image);
RadialSpectrum mean_spectrum(const DomainDataset& dataset);

DomainDataset filter_dataset(const DomainDataset& dataset, const LowPassSpec& spec);

}  // namespace styleshift::frequency
