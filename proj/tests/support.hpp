#pragma once

#include <filesystem>
#include <string>

#include "styleshift/datamodel.hpp"
#include "styleshift/random.hpp"

namespace styleshift::testing {

inline Image random_image(Rng& rng, int height, int width, int channels = 3) {
  Image img(height, width, channels);
  for (double& v : img.data()) v = rng.uniform();
  return img;
}

inline Image constant_image(int side, double value) { return Image(side, side, 3, value); }

/// Random images with labels cycling through the classes.
inline DomainDataset random_dataset(std::size_t n, int num_classes, int side, std::uint64_t seed,
                                    Domain domain = Domain::photo,
                                    const std::string& prefix = "s") {
  DomainDataset d(num_classes, domain, side);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    ImageSample s;
    s.id = prefix + std::to_string(i);
    s.pixels = random_image(rng, side, side);
    s.label = static_cast<int>(i % num_classes);
    s.domain = domain;
    d.add(std::move(s));
  }
  return d;
}

/// Two linearly separable classes: class 0 is darker and reddish, class 1
/// brighter and bluish, each with mild per-pixel noise.
inline DomainDataset separable_toy(std::size_t n, int side, std::uint64_t seed,
                                   Domain domain = Domain::photo,
                                   const std::string& prefix = "t") {
  DomainDataset d(2, domain, side);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    Image img(side, side, 3);
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const double noise = rng.uniform(-0.08, 0.08);
        img.at(y, x, 0) = (label == 0 ? 0.7 : 0.2) + noise;
        img.at(y, x, 1) = 0.4 + noise;
        img.at(y, x, 2) = (label == 0 ? 0.2 : 0.8) + noise;
      }
    }
    ImageSample s;
    s.id = prefix + std::to_string(i);
    s.pixels = std::move(img);
    s.label = label;
    s.domain = domain;
    d.add(std::move(s));
  }
  return d;
}

/// A fresh scratch directory under the system temp dir, removed on exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(std::hash<std::string>{}(tag) ^ reinterpret_cast<std::uintptr_t>(this));
    path_ = std::filesystem::temp_directory_path() /
            ("styleshift_" + tag + "_" + hex64(rng.next()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace styleshift::testing
