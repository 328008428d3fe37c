#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "styleshift/classifier.hpp"
#include "styleshift/datamodel.hpp"
#include "styleshift/nn.hpp"
#include "styleshift/stylization.hpp"

namespace styleshift::training {

using nn::Matrix;

// -- Configuration ---------------------------------------------------------

struct BackboneSpec {
  std::string architecture = "resnet_tiny";
  bool pretrained = false;
  std::vector<int> widths = {8, 16, 32};
  int blocks_per_stage = 1;

  int feature_dim() const { return widths.empty() ? 0 : widths.back(); }
  void validate() const;

  /// Named presets: resnet_micro, resnet_tiny, resnet_small, resnet18.
  static BackboneSpec preset(std::string_view name);
};

struct AugmentationConfig {
  bool horizontal_flip = true;
  double scale_min = 0.9;
  double scale_max = 1.1;
  double color_jitter = 0.2;
  bool normalize = true;
};

struct TrainingConfig {
  int epochs = 30;
  double base_lr = 1e-3;
  int lr_drop_epoch = 24;  // first epoch at dropped_lr; past `epochs` means no drop
  double dropped_lr = 1e-4;
  double momentum = 0.9;
  double head_lr_multiplier = 10.0;
  int batch_size = 32;
  std::uint64_t seed = 0;
  AugmentationConfig augment;
  bool lr_normalization = false;
  int finetune_epochs = 5;
  double finetune_lr = 1e-4;
  double adversary_weight = 1.0;
  int adversary_warmup_epochs = 3;
  int discriminator_hidden = 32;
  BackboneSpec backbone;

  void validate() const;
  /// Backbone learning rate for a 1-based epoch.
  double lr_for_epoch(int epoch) const;
};

nlohmann::json to_json(const TrainingConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainingConfig training_config_from_json(const nlohmann::json& doc);

// -- Network ---------------------------------------------------------------

/// Per-channel input normalization applied before the backbone.
inline constexpr double kChannelMean[3] = {0.485, 0.456, 0.406};
inline constexpr double kChannelStd[3] = {0.229, 0.224, 0.225};

struct UnitCache {
  nn::Geometry in_geometry;
  nn::Geometry out_geometry;
  Matrix cols_a;
  Matrix act_a;
  Matrix cols_b;
  Matrix output;
};

struct ForwardCache {
  std::vector<UnitCache> units;
};

/// Stem conv, then per stage an optional stride-2 transition conv followed by
/// residual blocks relu(x + conv(relu(conv(x)))), then global average pooling.
class Backbone {
 public:
  Backbone() = default;
  Backbone(const BackboneSpec& spec, std::uint64_t seed);

  const BackboneSpec& spec() const { return spec_; }
  int feature_dim() const { return spec_.feature_dim(); }

  /// input: 3 x (batch * H * W). Returns features: feature_dim x batch.
  Matrix forward(const Matrix& input, const nn::Geometry& geometry, ForwardCache* cache) const;
  void backward(const Matrix& grad_features, const ForwardCache& cache);

  std::vector<nn::Param*> params();
  std::vector<const nn::Param*> params() const;
  std::uint64_t hash() const;

 private:
  struct Unit {
    bool residual = false;
    nn::Conv2d a;
    nn::Conv2d b;
  };
  BackboneSpec spec_;
  std::vector<Unit> units_;
};

struct ClassifierHead {
  Domain domain = Domain::photo;
  nn::Linear linear;
};

/// features -> hidden (ReLU) -> 2 logits (photo, other).
struct DomainDiscriminator {
  nn::Linear hidden;
  nn::Linear output;

  DomainDiscriminator() = default;
  DomainDiscriminator(int feature_dim, int hidden_units, std::uint64_t seed);
  std::vector<nn::Param*> params();
};

struct EpochRecord {
  int epoch = 0;
  std::string stage;
  double backbone_lr = 0.0;
  double head_lr = 0.0;
  double loss = 0.0;
  std::map<std::string, double> domain_loss;
  double adversary_weight = 0.0;
  double discriminator_loss = 0.0;
  double discriminator_accuracy = 0.0;
};

nlohmann::json to_json(const EpochRecord& record);

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  std::vector<std::string> warnings;
};

class TrainedModel final : public Classifier {
 public:
  std::string scheme;
  int num_classes = 0;
  int resolution = 0;
  TrainingConfig config;
  Backbone backbone;
  ClassifierHead head_n;
  std::optional<ClassifierHead> head_p;
  TrainingLog log;

  std::vector<double> logits(const Image& image) const;
  /// logits for every sample, classes x batch, evaluated in chunks.
  Matrix logits_batch(const std::vector<const Image*>& images) const;
  /// Pooled backbone features, feature_dim x batch.
  Matrix features_batch(const std::vector<const Image*>& images) const;

  std::vector<int> predict_set(std::string_view set_key,
                               const DomainDataset& dataset) const override;
  std::string identity() const override;
  std::uint64_t hash() const;
};

// -- Input pipeline --------------------------------------------------------

/// Applies train-time augmentation (flip, scale, color jitter) with `rng`.
Image augment_image(const Image& image, const AugmentationConfig& config, Rng& rng);
/// Packs images into a 3 x (batch * H * W) input matrix, normalized when
/// requested.
Matrix pack_batch(const std::vector<const Image*>& images, bool normalize);

// -- Objective -------------------------------------------------------------

/// A group of samples routed through one classifier head with a total loss
/// weight shared equally by its members.
struct BatchPart {
  std::vector<const Image*> images;
  std::vector<int> labels;
  std::vector<Domain> domains;
  int head = 0;
  double weight = 1.0;
};

struct ObjectiveOptions {
  bool backbone_grad = true;
  bool head_grad = true;
  /// Gradient-reversal strength applied to the discriminator term.
  double adversary_weight = 0.0;
  /// Computes the discriminator loss (and its gradients) even at weight 0.
  bool use_discriminator = false;
};

struct ObjectiveValue {
  double classification = 0.0;
  double discriminator = 0.0;
  /// classification - adversary_weight * discriminator: the quantity whose
  /// gradient the backbone receives.
  double backbone_objective = 0.0;
  std::map<std::string, double> domain_loss_sum;
  std::map<std::string, int> domain_count;
  int discriminator_correct = 0;
  int discriminator_total = 0;
};

/// The trainable pieces of a model, referenced rather than owned.
struct Network {
  Backbone* backbone = nullptr;
  std::vector<ClassifierHead*> heads;
  DomainDiscriminator* discriminator = nullptr;

  std::vector<nn::Param*> head_params();
  void zero_grad();
};

/// Forward pass over all parts; when `accumulate` is set, backpropagates and
/// adds parameter gradients. Discriminator parameters receive the gradient of
/// the discriminator loss; the backbone receives the reversed gradient.
ObjectiveValue evaluate_objective(Network& network, const std::vector<BatchPart>& parts,
                                  const ObjectiveOptions& options, bool accumulate);

// -- Schemes ---------------------------------------------------------------

TrainedModel train_joint(const std::vector<const DomainDataset*>& data,
                         const TrainingConfig& config);
TrainedModel train_with_stylization(const DomainDataset& photos,
                                    const DomainDataset& stylized,
                                    const TrainingConfig& config);

struct MultitaskWeights {
  double photo = 0.5;
  double painting = 0.5;
};

TrainedModel train_multitask(const DomainDataset& photos, const DomainDataset& paintings,
                             const TrainingConfig& config,
                             const MultitaskWeights& weights = {});
TrainedModel train_finetuned(const DomainDataset& photos, const DomainDataset& paintings,
                             const TrainingConfig& config, int finetune_epochs);
/// Continues from a stage-one model: re-fits head_n on photos with the
/// backbone frozen.
TrainedModel refit_photo_head(const TrainedModel& stage_one, const DomainDataset& photos,
                              const TrainingConfig& config, int finetune_epochs);
TrainedModel train_domain_adversarial(const DomainDataset& photos,
                                      const DomainDataset& paintings,
                                      const TrainingConfig& config, double adversary_weight);

/// Adversary weight in effect during a 1-based epoch (linear warm-up).
double adversary_weight_for_epoch(const TrainingConfig& config, double weight, int epoch);

int predict(const TrainedModel& model, const Image& image);
std::vector<int> predict_batch(const TrainedModel& model, const DomainDataset& dataset);

/// Held-out accuracy of a logistic-regression probe separating the pooled
/// features of two datasets (first half of each for fitting, rest for test).
double domain_probe_accuracy(const TrainedModel& model, const DomainDataset& a,
                             const DomainDataset& b);

// -- Persistence -----------------------------------------------------------

void save_checkpoint(const TrainedModel& model, const std::string& path);
TrainedModel load_checkpoint(const std::string& path);
void write_training_log(const TrainingLog& log, const std::string& path);

// -- Feature plugin --------------------------------------------------------

/// Exposes a trained backbone's block activations for Gram-distance studies.
class ModelFeatureExtractor final : public stylization::FeatureExtractor {
 public:
  explicit ModelFeatureExtractor(const TrainedModel& model) : model_(model) {}
  std::string name() const override { return "model:" + model_.scheme; }
  std::vector<stylization::FeatureLayer> extract(const Image& image) const override;

 private:
  const TrainedModel& model_;
};

}  // namespace styleshift::training
