#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "styleshift/datamodel.hpp"
#include "styleshift/image.hpp"

namespace styleshift::corruptions {

enum class Category { noise, blur, weather, digital };

std::string_view to_string(Category category);
Category parse_category(std::string_view text);

inline constexpr std::array<Category, 4> kCategories = {Category::noise, Category::blur,
                                                        Category::weather, Category::digital};
inline constexpr int kMinSeverity = 1;
inline constexpr int kMaxSeverity = 5;

/// The 15 corruption names in canonical order (noise, blur, weather, digital).
const std::vector<std::string>& corruption_names();
std::vector<std::string> corruptions_in(Category category);
Category category_of(std::string_view name);
/// True when the corruption draws from its seed.
bool is_stochastic(std::string_view name);
/// Version tag of the severity parameter tables.
std::string_view severity_table_version();

struct CorruptionSpec {
  std::string name;
  Category category = Category::noise;
  int severity = 1;

  /// Validates name and severity; throws Error("corruption.spec") otherwise.
  static CorruptionSpec make(std::string_view name, int severity);
  /// Parses "name:severity".
  static CorruptionSpec parse(std::string_view text);
  std::string key() const;  // "name:severity"

  friend bool operator==(const CorruptionSpec&, const CorruptionSpec&) = default;
};

/// All 75 specs in canonical order.
std::vector<CorruptionSpec> all_specs();

/// Applies one corruption. Pure in (image, spec, seed); output in [0, 1].
Image apply_corruption(const Image& image, const CorruptionSpec& spec, std::uint64_t seed);

struct CorruptedSet {
  CorruptionSpec spec;
  DomainDataset samples;
};

/// Per-image seed hash(master_seed, name, severity, sample id).
std::uint64_t sample_seed(std::uint64_t master_seed, const CorruptionSpec& spec,
                          std::string_view sample_id);

CorruptedSet corrupt_set(const DomainDataset& test, const CorruptionSpec& spec,
                         std::uint64_t master_seed);
std::vector<CorruptedSet> corrupt_dataset(const DomainDataset& test,
                                          const std::vector<CorruptionSpec>& specs,
                                          std::uint64_t master_seed);

// Building blocks shared with other modules.

/// Separable Gaussian blur with reflect boundary, truncated at 4 sigma.
Image gaussian_blur(const Image& image, double sigma);
/// Diamond-square fractal in [0, 1], size x size (size a power of two).
std::vector<double> plasma_fractal(int size, double wibble_decay, std::uint64_t seed);
/// Zooms in by `zoom` about the center, keeping the input size.
Image clipped_zoom(const Image& image, double zoom);

}  // namespace styleshift::corruptions
