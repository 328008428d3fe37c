#pragma once

// Severity parameters for the 15 corruptions, indexed by severity - 1.
// Spatial quantities are given in pixels at 224x224 and scaled linearly to
// the working resolution. Bump kSeverityTableVersion whenever a value here
// changes: golden output hashes are pinned against it.

#include <array>
#include <string_view>

namespace styleshift::corruptions::tables {

inline constexpr std::string_view kSeverityTableVersion = "2024.3";
inline constexpr double kReferenceSide = 224.0;

// Additive Gaussian noise standard deviation.
inline constexpr std::array<double, 5> kGaussianNoise = {0.08, 0.12, 0.18, 0.26, 0.38};
// Photon count scale: out = Poisson(x * c) / c.
inline constexpr std::array<double, 5> kShotNoise = {60, 25, 12, 5, 3};
// Salt-and-pepper replacement probability per value.
inline constexpr std::array<double, 5> kImpulseNoise = {0.03, 0.06, 0.09, 0.17, 0.27};

struct DefocusParams {
  double radius;
  double alias_sigma;
};
inline constexpr std::array<DefocusParams, 5> kDefocusBlur = {
    {{3, 0.1}, {4, 0.5}, {6, 0.5}, {8, 0.5}, {10, 0.5}}};

struct GlassParams {
  double sigma;
  double max_delta;
  int iterations;
};
inline constexpr std::array<GlassParams, 5> kGlassBlur = {
    {{0.7, 1, 2}, {0.9, 2, 1}, {1.0, 2, 3}, {1.1, 3, 2}, {1.5, 4, 2}}};

struct MotionParams {
  double radius;
  double sigma;
};
inline constexpr std::array<MotionParams, 5> kMotionBlur = {
    {{10, 3}, {15, 5}, {15, 8}, {15, 12}, {20, 15}}};
// Fixed streak direction, degrees counter-clockwise from +x.
inline constexpr double kMotionAngleDegrees = 30.0;

struct ZoomParams {
  double start;
  double stop;  // exclusive, as in arange
  double step;
};
inline constexpr std::array<ZoomParams, 5> kZoomBlur = {
    {{1.0, 1.11, 0.01}, {1.0, 1.16, 0.01}, {1.0, 1.21, 0.02}, {1.0, 1.26, 0.02},
     {1.0, 1.31, 0.03}}};

// Severity 3 uses threshold 0.85 rather than 0.9: with the larger blur the
// sparser flakes distorted less than severity 2.
struct SnowParams {
  double loc;
  double scale;
  double zoom;
  double threshold;
  double blur_radius;
  double blur_sigma;
  double blend;
};
inline constexpr std::array<SnowParams, 5> kSnow = {{{0.1, 0.3, 3.0, 0.5, 10, 4, 0.8},
                                                     {0.2, 0.3, 2.0, 0.5, 12, 4, 0.7},
                                                     {0.55, 0.3, 4.0, 0.85, 12, 8, 0.7},
                                                     {0.55, 0.3, 4.5, 0.85, 12, 8, 0.65},
                                                     {0.55, 0.3, 2.5, 0.85, 12, 12, 0.55}}};

// The frost weight keeps rising at severities 4 and 5 so that the distortion
// does not fall while the image weight drops.
struct FrostParams {
  double image_weight;
  double frost_weight;
};
inline constexpr std::array<FrostParams, 5> kFrost = {
    {{1.0, 0.4}, {0.8, 0.6}, {0.7, 0.7}, {0.65, 0.75}, {0.6, 0.8}}};

struct FogParams {
  double strength;
  double wibble_decay;
};
inline constexpr std::array<FogParams, 5> kFog = {
    {{1.5, 2.0}, {2.0, 2.0}, {2.5, 1.7}, {2.5, 1.5}, {3.0, 1.4}}};

// Added to the HSV value channel.
inline constexpr std::array<double, 5> kBrightness = {0.1, 0.2, 0.3, 0.4, 0.5};
// Factor applied to deviations from the per-channel mean.
inline constexpr std::array<double, 5> kContrast = {0.4, 0.3, 0.2, 0.1, 0.05};

// Elastic displacement RMS amplitude and field smoothness, both as
// fractions of the image side.
struct ElasticParams {
  double amplitude;
  double smoothness;
};
inline constexpr std::array<ElasticParams, 5> kElastic = {
    {{0.010, 0.05}, {0.018, 0.05}, {0.028, 0.05}, {0.040, 0.05}, {0.055, 0.05}}};

// Downscale factor before box upsampling.
inline constexpr std::array<double, 5> kPixelate = {0.6, 0.5, 0.4, 0.3, 0.25};
inline constexpr std::array<int, 5> kJpegQuality = {25, 18, 15, 10, 7};

}  // namespace styleshift::corruptions::tables
