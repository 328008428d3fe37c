#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "styleshift/image.hpp"

namespace styleshift {

enum class Domain { photo, painting, stylized, filtered };

std::string_view to_string(Domain domain);
Domain parse_domain(std::string_view text);

/// One labeled, domain-tagged square image patch.
struct ImageSample {
  std::string id;
  Image pixels;
  int label = 0;
  Domain domain = Domain::photo;
  std::string provenance;
  /// Path recorded in the manifest this sample was loaded from (or saved
  /// to); empty for samples that exist only in memory.
  std::string image_path;
};

class DomainDataset {
 public:
  DomainDataset() = default;
  DomainDataset(int num_classes, Domain domain, int resolution);

  int num_classes() const { return num_classes_; }
  Domain domain() const { return domain_; }
  int resolution() const { return resolution_; }
  const std::vector<ImageSample>& samples() const { return samples_; }
  std::vector<ImageSample>& mutable_samples() { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const ImageSample& operator[](std::size_t i) const { return samples_[i]; }

  /// Appends a sample after checking its label, domain and shape.
  void add(ImageSample sample);

  /// class -> sample ids, in dataset order.
  std::map<int, std::vector<std::string>> class_index() const;
  std::vector<std::size_t> class_counts() const;
  std::optional<std::size_t> find(std::string_view id) const;

  /// Throws if any invariant is violated (domain, label range, shape,
  /// pixel range, duplicate ids).
  void validate() const;

  /// Content hash over ids, labels, domains and 8-bit pixel values.
  std::uint64_t content_hash() const;

  void set_domain(Domain domain) { domain_ = domain; }

 private:
  int num_classes_ = 1;
  Domain domain_ = Domain::photo;
  int resolution_ = 224;
  std::vector<ImageSample> samples_;
};

/// Merges datasets sharing a class vocabulary and resolution. The result is
/// tagged with the domain of the first input; samples keep their own domain.
std::vector<ImageSample> merge_samples(const std::vector<const DomainDataset*>& parts);

// -- Patch extraction ------------------------------------------------------

struct BoundingBox {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
};

struct Segment {
  std::string image_id;
  BoundingBox tight_box;
  int label = 0;
};

struct SquareCrop {
  int x0 = 0;
  int y0 = 0;
  int side = 0;
};

/// Square of side ceil(1.5 * min(w, h)) centered on the box center.
SquareCrop context_square(const BoundingBox& box);

using ImageStore = std::function<const Image*(const std::string& image_id)>;

struct PatchOptions {
  int resolution = 224;
  /// Fill for out-of-image regions; std::nullopt means the channel mean of
  /// the source image.
  std::optional<std::array<double, 3>> pad_value;
  bool paintings = false;
  /// Minimum tight-box area in source pixels when `paintings` is set.
  int min_painting_area = 128 * 128;
  Domain domain = Domain::photo;
};

struct PatchResult {
  std::vector<ImageSample> samples;
  std::vector<std::string> rejected;
};

PatchResult extract_patches(const std::vector<Segment>& segments,
                            const ImageStore& images, const PatchOptions& options);

/// Crops `side` x `side` at (x0, y0), filling out-of-image pixels with pad.
Image crop_with_padding(const Image& source, const SquareCrop& crop,
                        const std::array<double, 3>& pad);

// -- Sampling --------------------------------------------------------------

/// Per-class quotas summing to `target_total`: water-filling with exhausted
/// classes taking their whole supply and the remainder handed out one each
/// to classes with the largest remaining supply (ties by class index).
std::vector<std::size_t> balanced_quotas(const std::vector<std::size_t>& supply,
                                         std::size_t target_total);

DomainDataset balance_classes(const DomainDataset& dataset, std::size_t target_total,
                              std::uint64_t seed);

struct BudgetSplit {
  std::size_t budget = 0;
  double painting_fraction = 0.0;
  std::size_t photo_count = 0;
  std::size_t painting_count = 0;

  /// painting_count = round-half-to-even(fraction * budget).
  static BudgetSplit make(std::size_t budget, double painting_fraction);
};

std::pair<DomainDataset, DomainDataset> make_budget_split(const DomainDataset& photos,
                                                          const DomainDataset& paintings,
                                                          const BudgetSplit& split,
                                                          std::uint64_t seed);

// -- Manifests -------------------------------------------------------------

/// Tab-separated manifest. The first line is a header of the form
///   #styleshift-manifest v1 <TAB> num_classes=N <TAB> resolution=R <TAB> domain=D
/// followed by one record per sample:
///   id <TAB> image_path <TAB> label <TAB> domain <TAB> provenance
/// Image paths are relative to the manifest's directory unless absolute.
DomainDataset load_manifest(const std::string& path);

/// Writes the manifest. Samples with an empty image_path get their pixels
/// written to `images/<id>.png` next to the manifest (the sample's
/// image_path is updated to the relative path written).
void save_manifest(DomainDataset& dataset, const std::string& path);

}  // namespace styleshift
