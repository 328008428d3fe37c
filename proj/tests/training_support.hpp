#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "styleshift/training.hpp"
#include "support.hpp"

// Toy training setups and finite-difference gradient checks shared by the
// unit tests and the acceptance run.
namespace styleshift::testing {

using namespace styleshift::training;

inline TrainingConfig toy_config(int epochs = 30) {
  TrainingConfig c;
  c.epochs = epochs;
  c.lr_drop_epoch = epochs + 1;  // no drop within the run
  c.base_lr = 0.01;
  c.dropped_lr = 0.001;
  c.batch_size = 16;
  c.finetune_epochs = 3;
  c.finetune_lr = 0.001;
  c.backbone = BackboneSpec::preset("resnet_micro");
  c.augment.horizontal_flip = false;
  c.augment.scale_min = c.augment.scale_max = 1.0;
  c.augment.color_jitter = 0.0;
  return c;
}

inline DomainDataset as_domain(const DomainDataset& src, Domain domain, const std::string& prefix) {
  DomainDataset out(src.num_classes(), domain, src.resolution());
  for (const auto& s : src.samples()) {
    ImageSample copy = s;
    copy.id = prefix + s.id;
    copy.domain = domain;
    copy.image_path.clear();
    out.add(std::move(copy));
  }
  return out;
}

// Paintings for the toy task: same class colours, but a strong vertical
// stripe pattern that makes the domain easy to tell apart.
inline DomainDataset toy_paintings(std::size_t n, int side, std::uint64_t seed) {
  DomainDataset d = separable_toy(n, side, seed, Domain::painting, "q");
  for (auto& s : d.mutable_samples()) {
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; x += 2) {
        for (int c = 0; c < 3; ++c) s.pixels.at(y, x, c) = std::min(1.0, s.pixels.at(y, x, c) + 0.25);
      }
    }
  }
  return d;
}

struct GradFixture {
  Backbone backbone;
  ClassifierHead h0;
  ClassifierHead h1;
  DomainDiscriminator disc;
  std::vector<Image> images;

  explicit GradFixture(std::uint64_t seed) {
    BackboneSpec spec;
    spec.widths = {3, 4};
    backbone = Backbone(spec, seed);
    Rng rng(seed + 1);
    // Zero biases put dead units exactly on the ReLU kink; move off it.
    for (auto* p : backbone.params()) {
      if (p->name.ends_with(".bias")) {
        for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = rng.normal(0.0, 0.1);
      }
    }
    h0.linear = nn::Linear("h0", 4, 3);
    h0.linear.init_normal(rng, 0.3);
    h1.domain = Domain::painting;
    h1.linear = nn::Linear("h1", 4, 3);
    h1.linear.init_normal(rng, 0.3);
    disc = DomainDiscriminator(4, 5, seed + 2);
    for (int i = 0; i < 8; ++i) images.push_back(random_image(rng, 6, 6));
  }

  BatchPart part(int first, int count, Domain domain, int head, double weight) const {
    BatchPart p;
    for (int i = first; i < first + count; ++i) {
      p.images.push_back(&images[i]);
      p.labels.push_back(i % 3);
      p.domains.push_back(domain);
    }
    p.head = head;
    p.weight = weight;
    return p;
  }
};

struct Probe {
  nn::Param* param;
  std::function<double(const ObjectiveValue&)> quantity;
};

struct GradCheck {
  double worst = 0.0;
  std::string where;
};

// Compares accumulated gradients with central differences of the quantity
// each parameter group is trained on. Entries whose gradient is below 1e-7
// count as exact when both sides agree to 1e-9.
inline GradCheck check_gradients(Network& net, const std::vector<BatchPart>& parts,
                                 const ObjectiveOptions& options, const std::vector<Probe>& probes,
                                 std::uint64_t seed, int entries_per_param = 3) {
  net.zero_grad();
  if (net.discriminator) {
    for (auto* p : net.discriminator->params()) p->zero_grad();
  }
  evaluate_objective(net, parts, options, true);
  Rng rng(seed);
  GradCheck result;
  const double h = 1e-6;
  for (const Probe& probe : probes) {
    for (int k = 0; k < entries_per_param; ++k) {
      const auto idx = static_cast<Eigen::Index>(rng.uniform_int(probe.param->value.size()));
      double& w = probe.param->value.data()[idx];
      const double saved = w;
      w = saved + h;
      const double up = probe.quantity(evaluate_objective(net, parts, options, false));
      w = saved - h;
      const double down = probe.quantity(evaluate_objective(net, parts, options, false));
      w = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = probe.param->grad.data()[idx];
      const double diff = std::abs(numeric - analytic);
      const double scale = std::max(std::abs(numeric), std::abs(analytic));
      const double rel = scale < 1e-7 ? (diff < 1e-9 ? 0.0 : 1.0) : diff / scale;
      if (rel > result.worst) {
        result.worst = rel;
        result.where = probe.param->name + "[" + std::to_string(idx) + "] analytic " +
                       std::to_string(analytic) + " numeric " + std::to_string(numeric);
      }
    }
  }
  return result;
}

inline std::vector<Probe> backbone_probes(Backbone& b,
                                          std::function<double(const ObjectiveValue&)> q) {
  std::vector<Probe> probes;
  for (auto* p : b.params()) probes.push_back({p, q});
  return probes;
}

inline double classification_of(const ObjectiveValue& v) { return v.classification; }
inline double backbone_objective_of(const ObjectiveValue& v) { return v.backbone_objective; }
inline double discriminator_of(const ObjectiveValue& v) { return v.discriminator; }

}  // namespace styleshift::testing
