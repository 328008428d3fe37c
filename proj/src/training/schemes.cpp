#include <algorithm>
#include <cmath>

#include "styleshift/error.hpp"
#include "styleshift/training.hpp"

namespace styleshift::training {

// -- Objective -------------------------------------------------------------

std::vector<nn::Param*> Network::head_params() {
  std::vector<nn::Param*> out;
  for (ClassifierHead* head : heads) {
    out.push_back(&head->linear.weight);
    out.push_back(&head->linear.bias);
  }
  return out;
}

void Network::zero_grad() {
  for (nn::Param* p : backbone->params()) p->zero_grad();
  for (nn::Param* p : head_params()) p->zero_grad();
  if (discriminator != nullptr) {
    for (nn::Param* p : discriminator->params()) p->zero_grad();
  }
}

ObjectiveValue evaluate_objective(Network& network, const std::vector<BatchPart>& parts,
                                  const ObjectiveOptions& options, bool accumulate) {
  ObjectiveValue value;
  const bool with_disc = options.use_discriminator || options.adversary_weight > 0.0;
  if (with_disc && network.discriminator == nullptr) {
    throw Error("training.objective", "adversarial objective without a discriminator");
  }
  std::size_t total = 0;
  for (const BatchPart& part : parts) total += part.images.size();

  for (const BatchPart& part : parts) {
    const std::size_t n = part.images.size();
    if (n == 0) continue;
    if (part.labels.size() != n || part.domains.size() != n) {
      throw Error("training.objective", "batch part fields disagree in length");
    }
    if (part.head < 0 || part.head >= static_cast<int>(network.heads.size())) {
      throw Error("training.objective", "batch part routed to a missing head");
    }
    ClassifierHead& head = *network.heads[part.head];
    const int res = part.images.front()->height();
    const nn::Geometry g{static_cast<int>(n), 3, res, part.images.front()->width()};
    ForwardCache cache;
    const Matrix input = pack_batch(part.images, true);
    const Matrix features = network.backbone->forward(input, g, accumulate ? &cache : nullptr);
    const Matrix logits = head.linear.forward(features);
    const std::vector<double> weights(n, part.weight / static_cast<double>(n));
    const nn::CrossEntropy ce = nn::softmax_cross_entropy(logits, part.labels, weights);
    value.classification += ce.loss;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string key(to_string(part.domains[i]));
      value.domain_loss_sum[key] += ce.per_sample[i];
      value.domain_count[key] += 1;
    }

    Matrix grad_features;
    if (accumulate) {
      if (options.head_grad) {
        grad_features = head.linear.backward(ce.grad, features, options.backbone_grad);
      } else if (options.backbone_grad) {
        grad_features = head.linear.weight.value.transpose() * ce.grad;
      }
    }

    if (with_disc) {
      DomainDiscriminator& disc = *network.discriminator;
      const Matrix hidden = nn::relu(disc.hidden.forward(features));
      const Matrix dlogits = disc.output.forward(hidden);
      std::vector<int> dlabels(n);
      for (std::size_t i = 0; i < n; ++i) dlabels[i] = part.domains[i] == Domain::photo ? 0 : 1;
      const std::vector<double> dweights(n, 1.0 / static_cast<double>(total));
      const nn::CrossEntropy dce = nn::softmax_cross_entropy(dlogits, dlabels, dweights);
      value.discriminator += dce.loss;
      for (std::size_t i = 0; i < n; ++i) {
        const int guess = dlogits(1, static_cast<Eigen::Index>(i)) >
                                  dlogits(0, static_cast<Eigen::Index>(i))
                              ? 1
                              : 0;
        if (guess == dlabels[i]) ++value.discriminator_correct;
        ++value.discriminator_total;
      }
      if (accumulate) {
        const Matrix g_hidden = disc.output.backward(dce.grad, hidden, true);
        const Matrix g_pre = nn::relu_backward(g_hidden, hidden);
        const Matrix g_feat = disc.hidden.backward(g_pre, features, true);
        if (options.backbone_grad && options.adversary_weight != 0.0) {
          grad_features -= options.adversary_weight * g_feat;
        }
      }
    }

    if (accumulate && options.backbone_grad) network.backbone->backward(grad_features, cache);
  }
  value.backbone_objective = value.classification - options.adversary_weight * value.discriminator;
  return value;
}

// -- Schemes ---------------------------------------------------------------

namespace {

std::vector<const ImageSample*> collect(const std::vector<const DomainDataset*>& data) {
  std::vector<const ImageSample*> out;
  for (const DomainDataset* d : data) {
    for (const auto& s : d->samples()) out.push_back(&s);
  }
  return out;
}

void check_compatible(const std::vector<const DomainDataset*>& data) {
  if (data.empty()) throw Error("training.empty", "no training data");
  for (const DomainDataset* d : data) {
    if (d->num_classes() != data.front()->num_classes()) {
      throw Error("training.vocabulary", "training sets have different class vocabularies");
    }
    if (d->resolution() != data.front()->resolution()) {
      throw Error("training.resolution", "training sets have different resolutions");
    }
  }
}

TrainedModel make_model(std::string scheme, int num_classes, int resolution,
                        const TrainingConfig& config, bool two_heads) {
  config.validate();
  TrainedModel model;
  model.scheme = std::move(scheme);
  model.num_classes = num_classes;
  model.resolution = resolution;
  model.config = config;
  model.backbone = Backbone(config.backbone, config.seed);
  const int dim = model.backbone.feature_dim();
  model.head_n.domain = Domain::photo;
  model.head_n.linear = nn::Linear("head_n", dim, num_classes);
  Rng rng_n(derive_seed(config.seed, "head_n_init"));
  model.head_n.linear.init_normal(rng_n, 0.01);
  if (two_heads) {
    ClassifierHead head_p;
    head_p.domain = Domain::painting;
    head_p.linear = nn::Linear("head_p", dim, num_classes);
    Rng rng_p(derive_seed(config.seed, "head_p_init"));
    head_p.linear.init_normal(rng_p, 0.01);
    model.head_p = std::move(head_p);
  }
  return model;
}

void warn_missing_classes(TrainedModel& model, const std::vector<const ImageSample*>& samples) {
  std::vector<int> counts(model.num_classes, 0);
  for (const ImageSample* s : samples) counts[s->label] += 1;
  for (int c = 0; c < model.num_classes; ++c) {
    if (counts[c] == 0) {
      model.log.warnings.push_back("class " + std::to_string(c) + " has no training samples");
    }
  }
}

struct EpochAccumulator {
  std::map<std::string, double> loss_sum;
  std::map<std::string, int> count;
  double disc_loss = 0.0;
  int disc_batches = 0;
  int disc_correct = 0;
  int disc_total = 0;

  void add(const ObjectiveValue& v, bool with_disc) {
    for (const auto& [k, s] : v.domain_loss_sum) loss_sum[k] += s;
    for (const auto& [k, n] : v.domain_count) count[k] += n;
    if (with_disc) {
      disc_loss += v.discriminator;
      ++disc_batches;
      disc_correct += v.discriminator_correct;
      disc_total += v.discriminator_total;
    }
  }

  void fill(EpochRecord& r) const {
    double total = 0.0;
    int n = 0;
    for (const auto& [k, s] : loss_sum) {
      r.domain_loss[k] = s / count.at(k);
      total += s;
      n += count.at(k);
    }
    r.loss = n > 0 ? total / n : 0.0;
    if (disc_batches > 0) {
      r.discriminator_loss = disc_loss / disc_batches;
      r.discriminator_accuracy = static_cast<double>(disc_correct) / disc_total;
    }
  }
};

BatchPart make_part(const std::vector<const ImageSample*>& members, std::vector<Image>& storage,
                    const AugmentationConfig& augment, Rng& rng, int head, double weight) {
  BatchPart part;
  part.head = head;
  part.weight = weight;
  storage.clear();
  storage.reserve(members.size());
  for (const ImageSample* s : members) storage.push_back(augment_image(s->pixels, augment, rng));
  for (std::size_t i = 0; i < members.size(); ++i) {
    part.images.push_back(&storage[i]);
    part.labels.push_back(members[i]->label);
    part.domains.push_back(members[i]->domain);
  }
  return part;
}

void apply_updates(Network& net, double backbone_lr, double head_lr, double momentum,
                   bool update_backbone) {
  if (update_backbone) {
    for (nn::Param* p : net.backbone->params()) nn::sgd_step(*p, backbone_lr, momentum);
  }
  for (nn::Param* p : net.head_params()) nn::sgd_step(*p, head_lr, momentum);
  if (net.discriminator != nullptr) {
    for (nn::Param* p : net.discriminator->params()) nn::sgd_step(*p, head_lr, momentum);
  }
}

/// Single-head training over a pooled sample list: joint, stylized and
/// domain-adversarial schemes share this loop.
void run_union(TrainedModel& model, const std::vector<const ImageSample*>& samples,
               DomainDiscriminator* disc, double adversary_weight) {
  const TrainingConfig& cfg = model.config;
  Network net{&model.backbone, {&model.head_n}, disc};
  std::vector<Image> storage;
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cfg.lr_for_epoch(epoch);
    const double head_lr = lr * cfg.head_lr_multiplier;
    const double lambda = disc != nullptr ? adversary_weight_for_epoch(cfg, adversary_weight, epoch)
                                          : 0.0;
    Rng order_rng(derive_seed(cfg.seed, "order", static_cast<std::uint64_t>(epoch)));
    Rng augment_rng(derive_seed(cfg.seed, "augment", static_cast<std::uint64_t>(epoch)));
    const auto order = order_rng.permutation(samples.size());
    EpochAccumulator acc;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<const ImageSample*> members;
      for (std::size_t i = start; i < end; ++i) members.push_back(samples[order[i]]);
      const BatchPart part = make_part(members, storage, cfg.augment, augment_rng, 0, 1.0);
      net.zero_grad();
      ObjectiveOptions options;
      options.use_discriminator = disc != nullptr;
      options.adversary_weight = lambda;
      const ObjectiveValue v = evaluate_objective(net, {part}, options, true);
      acc.add(v, disc != nullptr);
      apply_updates(net, lr, head_lr, cfg.momentum, true);
    }
    EpochRecord record;
    record.epoch = epoch;
    record.stage = model.scheme == "finetune" ? "joint" : model.scheme;
    record.backbone_lr = lr;
    record.head_lr = head_lr;
    record.adversary_weight = lambda;
    acc.fill(record);
    model.log.epochs.push_back(std::move(record));
  }
}

/// Endless reshuffled walk over indices [0, n).
class Cycler {
 public:
  Cycler(std::size_t n, Rng& rng) : n_(n), rng_(rng) {}
  std::size_t next() {
    if (pos_ >= order_.size()) {
      order_ = rng_.permutation(n_);
      pos_ = 0;
    }
    return order_[pos_++];
  }

 private:
  std::size_t n_;
  Rng& rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

}  // namespace

double adversary_weight_for_epoch(const TrainingConfig& config, double weight, int epoch) {
  if (config.adversary_warmup_epochs <= 0) return weight;
  const double ramp = std::min(1.0, static_cast<double>(epoch) / config.adversary_warmup_epochs);
  return weight * ramp;
}

TrainedModel train_joint(const std::vector<const DomainDataset*>& data,
                         const TrainingConfig& config) {
  check_compatible(data);
  const auto samples = collect(data);
  if (samples.empty()) throw Error("training.empty", "training data is empty");
  TrainedModel model =
      make_model("joint", data.front()->num_classes(), data.front()->resolution(), config, false);
  warn_missing_classes(model, samples);
  run_union(model, samples, nullptr, 0.0);
  return model;
}

TrainedModel train_with_stylization(const DomainDataset& photos, const DomainDataset& stylized,
                                    const TrainingConfig& config) {
  check_compatible({&photos, &stylized});
  if (photos.empty()) throw Error("training.empty", "photo set is empty");
  for (const auto& s : stylized.samples()) {
    const std::string content = stylization::paired_content_id(s);
    if (content.empty() || !photos.find(content)) {
      throw Error("training.unpaired",
                  "stylized sample '" + s.id + "' has no paired content image in the photo set");
    }
  }
  const auto samples = collect({&photos, &stylized});
  TrainedModel model =
      make_model("stylized", photos.num_classes(), photos.resolution(), config, false);
  warn_missing_classes(model, samples);
  run_union(model, samples, nullptr, 0.0);
  return model;
}

TrainedModel train_multitask(const DomainDataset& photos, const DomainDataset& paintings,
                             const TrainingConfig& config, const MultitaskWeights& weights) {
  check_compatible({&photos, &paintings});
  if (photos.empty() || paintings.empty()) {
    throw Error("training.empty", "multitask training needs photos and paintings");
  }
  TrainedModel model =
      make_model("multitask", photos.num_classes(), photos.resolution(), config, true);
  const auto photo_samples = collect({&photos});
  const auto painting_samples = collect({&paintings});
  warn_missing_classes(model, photo_samples);

  const TrainingConfig& cfg = model.config;
  Network net{&model.backbone, {&model.head_n, &*model.head_p}, nullptr};
  const std::size_t half = std::max<std::size_t>(1, cfg.batch_size / 2);
  const std::size_t longest = std::max(photo_samples.size(), painting_samples.size());
  const std::size_t steps = (longest + half - 1) / half;
  const double heads = 2.0;
  std::vector<Image> photo_storage;
  std::vector<Image> painting_storage;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cfg.lr_for_epoch(epoch);
    const double backbone_lr = cfg.lr_normalization ? lr / heads : lr;
    const double head_lr = lr * cfg.head_lr_multiplier;
    Rng photo_rng(derive_seed(cfg.seed, "order.photos", static_cast<std::uint64_t>(epoch)));
    Rng painting_rng(derive_seed(cfg.seed, "order.paintings", static_cast<std::uint64_t>(epoch)));
    Rng augment_rng(derive_seed(cfg.seed, "augment", static_cast<std::uint64_t>(epoch)));
    Cycler photo_walk(photo_samples.size(), photo_rng);
    Cycler painting_walk(painting_samples.size(), painting_rng);
    EpochAccumulator acc;
    for (std::size_t step = 0; step < steps; ++step) {
      std::vector<const ImageSample*> p_members;
      std::vector<const ImageSample*> q_members;
      for (std::size_t i = 0; i < half; ++i) p_members.push_back(photo_samples[photo_walk.next()]);
      for (std::size_t i = 0; i < half; ++i) {
        q_members.push_back(painting_samples[painting_walk.next()]);
      }
      std::vector<BatchPart> parts;
      parts.push_back(make_part(p_members, photo_storage, cfg.augment, augment_rng, 0,
                                weights.photo));
      parts.push_back(make_part(q_members, painting_storage, cfg.augment, augment_rng, 1,
                                weights.painting));
      net.zero_grad();
      const ObjectiveValue v = evaluate_objective(net, parts, {}, true);
      acc.add(v, false);
      apply_updates(net, backbone_lr, head_lr, cfg.momentum, true);
    }
    EpochRecord record;
    record.epoch = epoch;
    record.stage = "multitask";
    record.backbone_lr = backbone_lr;
    record.head_lr = head_lr;
    acc.fill(record);
    model.log.epochs.push_back(std::move(record));
  }
  return model;
}

TrainedModel refit_photo_head(const TrainedModel& stage_one, const DomainDataset& photos,
                              const TrainingConfig& config, int finetune_epochs) {
  if (finetune_epochs < 0) throw Error("config.training", "finetune_epochs must be >= 0");
  if (photos.empty()) throw Error("training.empty", "photo set is empty");
  TrainedModel model = stage_one;
  model.scheme = "finetune";
  model.head_p.reset();
  model.head_n.linear.weight.velocity.setZero();
  model.head_n.linear.bias.velocity.setZero();
  const auto samples = collect({&photos});
  Network net{&model.backbone, {&model.head_n}, nullptr};
  std::vector<Image> storage;
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  const double lr = config.finetune_lr;
  const double head_lr = lr * config.head_lr_multiplier;
  for (int epoch = 1; epoch <= finetune_epochs; ++epoch) {
    Rng order_rng(derive_seed(config.seed, "finetune.order", static_cast<std::uint64_t>(epoch)));
    Rng augment_rng(
        derive_seed(config.seed, "finetune.augment", static_cast<std::uint64_t>(epoch)));
    const auto order = order_rng.permutation(samples.size());
    EpochAccumulator acc;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<const ImageSample*> members;
      for (std::size_t i = start; i < end; ++i) members.push_back(samples[order[i]]);
      const BatchPart part = make_part(members, storage, config.augment, augment_rng, 0, 1.0);
      net.zero_grad();
      ObjectiveOptions options;
      options.backbone_grad = false;
      const ObjectiveValue v = evaluate_objective(net, {part}, options, true);
      acc.add(v, false);
      apply_updates(net, 0.0, head_lr, config.momentum, false);
    }
    EpochRecord record;
    record.epoch = static_cast<int>(stage_one.log.epochs.size()) + epoch;
    record.stage = "finetune";
    record.backbone_lr = 0.0;
    record.head_lr = head_lr;
    acc.fill(record);
    model.log.epochs.push_back(std::move(record));
  }
  return model;
}

TrainedModel train_finetuned(const DomainDataset& photos, const DomainDataset& paintings,
                             const TrainingConfig& config, int finetune_epochs) {
  check_compatible({&photos, &paintings});
  if (photos.empty() || paintings.empty()) {
    throw Error("training.empty", "finetune training needs photos and paintings");
  }
  TrainedModel stage_one = make_model("finetune", photos.num_classes(), photos.resolution(),
                                      config, false);
  const auto samples = collect({&photos, &paintings});
  warn_missing_classes(stage_one, samples);
  run_union(stage_one, samples, nullptr, 0.0);
  return refit_photo_head(stage_one, photos, config, finetune_epochs);
}

TrainedModel train_domain_adversarial(const DomainDataset& photos,
                                      const DomainDataset& paintings,
                                      const TrainingConfig& config, double adversary_weight) {
  if (!(adversary_weight >= 0.0)) {
    throw Error("config.training", "adversary weight must be >= 0");
  }
  check_compatible({&photos, &paintings});
  if (photos.empty() || paintings.empty()) {
    throw Error("training.empty", "adversarial training needs photos and paintings");
  }
  TrainedModel model =
      make_model("adversarial", photos.num_classes(), photos.resolution(), config, false);
  const auto samples = collect({&photos, &paintings});
  warn_missing_classes(model, samples);
  DomainDiscriminator disc(model.backbone.feature_dim(), config.discriminator_hidden, config.seed);
  run_union(model, samples, &disc, adversary_weight);
  return model;
}

}  // namespace styleshift::training
