#pragma once

#include <vector>

#include "styleshift/image.hpp"

namespace styleshift::corruptions {

struct Kernel2d {
  int radius = 0;
  std::vector<double> weights;  // (2r+1)^2, row-major
};

int reflect_index(int i, int n);
std::vector<double> gaussian_kernel_1d(double sigma);
Image convolve2d(const Image& image, const Kernel2d& kernel);
Kernel2d disk_kernel(double radius, double alias_sigma);
/// Streak blur along `angle_degrees` with a one-sided Gaussian profile;
/// out-of-range samples repeat the edge.
Image motion_blur(const Image& image, int radius, double sigma, double angle_degrees);
int next_power_of_two(int n);

}  // namespace styleshift::corruptions
