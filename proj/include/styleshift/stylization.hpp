#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "styleshift/datamodel.hpp"
#include "styleshift/image.hpp"
#include "styleshift/random.hpp"

namespace styleshift::stylization {

// -- Style sampling --------------------------------------------------------

enum class PolicyKind { painting_pool, intradomain_unrestricted, intradomain_intraclass };

std::string_view to_string(PolicyKind kind);
/// Accepts the CLI spellings "painting", "intradomain", "intraclass" as well
/// as the full enum names.
PolicyKind parse_policy(std::string_view text);

struct StylePolicy {
  PolicyKind kind = PolicyKind::intradomain_unrestricted;
  bool exclude_self = true;
};

/// Index into `pool` of a style image drawn uniformly from the policy's
/// eligible set.
std::size_t sample_style_index(const ImageSample& content, const DomainDataset& pool,
                               const StylePolicy& policy, Rng& rng);
const ImageSample& sample_style(const ImageSample& content, const DomainDataset& pool,
                                const StylePolicy& policy, Rng& rng);

// -- Moment-matching stylizer ---------------------------------------------

/// Invertible map between an image and a channels x positions feature
/// matrix. Moment matching happens in this space.
class FeatureCodec {
 public:
  virtual ~FeatureCodec() = default;
  virtual std::string name() const = 0;
  virtual Eigen::MatrixXd encode(const Image& image) const = 0;
  virtual Image decode(const Eigen::MatrixXd& features, int height, int width) const = 0;
};

/// Identity: the three RGB channels.
class RawPixelCodec final : public FeatureCodec {
 public:
  std::string name() const override { return "raw_pixels"; }
  Eigen::MatrixXd encode(const Image& image) const override;
  Image decode(const Eigen::MatrixXd& features, int height, int width) const override;
};

/// Orthonormal opponent-colour basis (luminance, yellow-blue, red-green):
/// the linear part of the l-alpha-beta space used for colour transfer.
class DecorrelatedColorCodec final : public FeatureCodec {
 public:
  std::string name() const override { return "decorrelated_color"; }
  Eigen::MatrixXd encode(const Image& image) const override;
  Image decode(const Eigen::MatrixXd& features, int height, int width) const override;
  static const Eigen::Matrix3d& basis();
};

enum class FeatureSpace { raw_pixels, decorrelated_color, plugin_features };
enum class StylizerKind { moment_match, external };

std::string_view to_string(FeatureSpace space);
FeatureSpace parse_feature_space(std::string_view text);

struct Stylizer {
  StylizerKind kind = StylizerKind::moment_match;
  FeatureSpace feature_space = FeatureSpace::decorrelated_color;
  /// 0 returns the content unchanged, 1 is full moment transfer.
  double strength = 1.0;
  /// Required when feature_space is plugin_features.
  std::shared_ptr<const FeatureCodec> plugin;
};

struct StylizeOutput {
  Image image;      // clamped to [0, 1]
  Image unclamped;  // decoder output before clamping
  std::vector<std::string> diagnostics;
};

inline constexpr double kStdFloor = 1e-6;

StylizeOutput moment_match_detailed(const Image& content, const Image& style,
                                    const Stylizer& stylizer);
Image moment_match_stylize(const Image& content, const Image& style, const Stylizer& stylizer);

// -- Dataset-level stylization --------------------------------------------

struct Pairing {
  std::string content_id;
  std::string style_id;

  friend bool operator==(const Pairing&, const Pairing&) = default;
};

struct StylizedDataset {
  DomainDataset dataset;
  std::vector<Pairing> pairs;
};

/// Stylizes every content sample exactly once. Stylized ids are
/// `<content id>.sty`; provenance records `content=<id>;style=<id>`.
StylizedDataset stylize_dataset(const DomainDataset& content, const DomainDataset& pool,
                                const StylePolicy& policy, const Stylizer& stylizer,
                                std::uint64_t master_seed);

std::string stylized_provenance(std::string_view content_id, std::string_view style_id);
/// Content id recorded in a stylized sample's provenance, or empty.
std::string paired_content_id(const ImageSample& stylized);

void save_pairing_table(const std::vector<Pairing>& pairs, const std::string& path);
std::vector<Pairing> load_pairing_table(const std::string& path);

/// Reads `content_id <TAB> style_tag <TAB> image_path` records and returns
/// a stylized dataset with labels copied from `content`. Images are resized
/// to the content resolution when needed.
DomainDataset import_external_stylized(const std::string& pairing_manifest,
                                       const DomainDataset& content);

// -- Gram-matrix style distance -------------------------------------------

struct FeatureLayer {
  std::string name;
  Eigen::MatrixXd features;  // channels x positions
};

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::string name() const = 0;
  virtual std::vector<FeatureLayer> extract(const Image& image) const = 0;
};

/// One layer holding the image channels as they are.
class PixelFeatures final : public FeatureExtractor {
 public:
  std::string name() const override { return "pixels"; }
  std::vector<FeatureLayer> extract(const Image& image) const override;
};

/// Fixed, weight-free multiscale bank: colour, oriented gradients and local
/// contrast at full, half and quarter resolution.
class FilterBankFeatures final : public FeatureExtractor {
 public:
  std::string name() const override { return "filterbank"; }
  std::vector<FeatureLayer> extract(const Image& image) const override;
};

enum class GramNormalization { none, channel_spatial };

struct GramDescriptor {
  std::vector<std::string> layers;
  std::vector<Eigen::MatrixXd> grams;
};

/// G = F F^T, divided by channels * positions under channel_spatial.
GramDescriptor gram_descriptor(const Image& image, const FeatureExtractor& features,
                               GramNormalization normalization = GramNormalization::channel_spatial);

/// Sum over layers of the Frobenius distance between Gram matrices.
double gram_distance(const Image& a, const Image& b, const FeatureExtractor& features,
                     GramNormalization normalization = GramNormalization::channel_spatial);

struct DistanceSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

DistanceSummary mean_pair_distance(const std::vector<std::pair<Image, Image>>& pairs,
                                   const FeatureExtractor& features,
                                   GramNormalization normalization = GramNormalization::channel_spatial);

/// Mean and population standard deviation of a list of values.
DistanceSummary summarize(const std::vector<double>& values);

}  // namespace styleshift::stylization
