#include <algorithm>
#include <cmath>

#include "styleshift/error.hpp"
#include "styleshift/training.hpp"

namespace styleshift::training {

namespace {

constexpr int kInferenceChunk = 64;

double sample_clamped(const Image& img, double y, double x, int c) {
  const int h = img.height();
  const int w = img.width();
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const double fy = y - y0;
  const double fx = x - x0;
  const double top = img.at(y0, x0, c) * (1.0 - fx) + img.at(y0, x1, c) * fx;
  const double bottom = img.at(y1, x0, c) * (1.0 - fx) + img.at(y1, x1, c) * fx;
  return top * (1.0 - fy) + bottom * fy;
}

Image scale_about_center(const Image& src, double scale) {
  Image out(src.height(), src.width(), src.channels());
  const double cy = src.height() / 2.0;
  const double cx = src.width() / 2.0;
  for (int y = 0; y < src.height(); ++y) {
    const double sy = (y + 0.5 - cy) / scale + cy - 0.5;
    for (int x = 0; x < src.width(); ++x) {
      const double sx = (x + 0.5 - cx) / scale + cx - 0.5;
      for (int c = 0; c < src.channels(); ++c) out.at(y, x, c) = sample_clamped(src, sy, sx, c);
    }
  }
  return out;
}

double luma(const Image& img, int y, int x) {
  return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
}

}  // namespace

// -- BackboneSpec ----------------------------------------------------------

void BackboneSpec::validate() const {
  if (widths.empty()) throw Error("config.backbone", "backbone needs at least one stage");
  for (int w : widths) {
    if (w <= 0) throw Error("config.backbone", "backbone widths must be positive");
  }
  if (blocks_per_stage < 0) throw Error("config.backbone", "blocks_per_stage must be >= 0");
  if (pretrained) {
    throw Error("config.backbone",
                "pretrained weights are not bundled; set pretrained=false for architecture '" +
                    architecture + "'");
  }
}

BackboneSpec BackboneSpec::preset(std::string_view name) {
  BackboneSpec spec;
  spec.architecture = std::string(name);
  if (name == "resnet_micro") {
    spec.widths = {4, 8};
    spec.blocks_per_stage = 1;
  } else if (name == "resnet_tiny") {
    spec.widths = {8, 16, 32};
    spec.blocks_per_stage = 1;
  } else if (name == "resnet_small") {
    spec.widths = {16, 32, 64};
    spec.blocks_per_stage = 2;
  } else if (name == "resnet18") {
    spec.widths = {64, 128, 256, 512};
    spec.blocks_per_stage = 2;
  } else {
    throw Error("config.backbone", "unknown backbone preset '" + std::string(name) + "'");
  }
  return spec;
}

// -- Backbone --------------------------------------------------------------

Backbone::Backbone(const BackboneSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  Rng rng(derive_seed(seed, "backbone_init"));
  auto add_plain = [&](const std::string& name, int in, int out, int stride) {
    Unit unit;
    unit.a = nn::Conv2d(name, in, out, 3, stride, 1);
    unit.a.init_he(rng);
    units_.push_back(std::move(unit));
  };
  add_plain("stem", 3, spec_.widths[0], 1);
  for (std::size_t s = 0; s < spec_.widths.size(); ++s) {
    const int width = spec_.widths[s];
    const std::string stage = "stage" + std::to_string(s);
    if (s > 0) add_plain(stage + ".down", spec_.widths[s - 1], width, 2);
    for (int b = 0; b < spec_.blocks_per_stage; ++b) {
      const std::string block = stage + ".block" + std::to_string(b);
      Unit unit;
      unit.residual = true;
      unit.a = nn::Conv2d(block + ".a", width, width, 3, 1, 1);
      unit.b = nn::Conv2d(block + ".b", width, width, 3, 1, 1);
      unit.a.init_he(rng);
      unit.b.init_he(rng, 0.5);
      units_.push_back(std::move(unit));
    }
  }
}

Matrix Backbone::forward(const Matrix& input, const nn::Geometry& geometry,
                         ForwardCache* cache) const {
  if (geometry.channels != 3) throw Error("nn.shape", "backbone expects 3 input channels");
  if (cache != nullptr) cache->units.assign(units_.size(), UnitCache{});
  Matrix x = input;
  nn::Geometry g = geometry;
  for (std::size_t i = 0; i < units_.size(); ++i) {
    const Unit& unit = units_[i];
    UnitCache* uc = cache != nullptr ? &cache->units[i] : nullptr;
    const nn::Geometry out_g = unit.a.output_geometry(g);
    Matrix out;
    if (!unit.residual) {
      out = nn::relu(unit.a.forward(x, g, uc != nullptr ? &uc->cols_a : nullptr));
    } else {
      Matrix h = nn::relu(unit.a.forward(x, g, uc != nullptr ? &uc->cols_a : nullptr));
      Matrix r = unit.b.forward(h, out_g, uc != nullptr ? &uc->cols_b : nullptr);
      out = nn::relu(x + r);
      if (uc != nullptr) uc->act_a = std::move(h);
    }
    if (uc != nullptr) {
      uc->in_geometry = g;
      uc->out_geometry = out_g;
      uc->output = out;
    }
    x = std::move(out);
    g = out_g;
  }
  return nn::global_average_pool(x, g);
}

void Backbone::backward(const Matrix& grad_features, const ForwardCache& cache) {
  if (cache.units.size() != units_.size()) throw Error("nn.cache", "stale forward cache");
  Matrix grad = nn::global_average_pool_backward(grad_features, cache.units.back().out_geometry);
  for (std::size_t k = units_.size(); k-- > 0;) {
    Unit& unit = units_[k];
    const UnitCache& uc = cache.units[k];
    const bool need_input = k > 0;
    Matrix g_sum = nn::relu_backward(grad, uc.output);
    if (!unit.residual) {
      grad = unit.a.backward(g_sum, uc.cols_a, uc.in_geometry, need_input);
    } else {
      Matrix g_h = unit.b.backward(g_sum, uc.cols_b, uc.out_geometry, true);
      Matrix g_pre = nn::relu_backward(g_h, uc.act_a);
      Matrix g_x = unit.a.backward(g_pre, uc.cols_a, uc.in_geometry, true);
      grad = g_sum + g_x;
    }
  }
}

std::vector<nn::Param*> Backbone::params() {
  std::vector<nn::Param*> out;
  for (Unit& unit : units_) {
    out.push_back(&unit.a.weight);
    out.push_back(&unit.a.bias);
    if (unit.residual) {
      out.push_back(&unit.b.weight);
      out.push_back(&unit.b.bias);
    }
  }
  return out;
}

std::vector<const nn::Param*> Backbone::params() const {
  std::vector<const nn::Param*> out;
  for (nn::Param* p : const_cast<Backbone*>(this)->params()) out.push_back(p);
  return out;
}

namespace {

void hash_param(Fnv1a& h, const nn::Param& p) {
  h.add(p.name);
  h.add(static_cast<std::uint64_t>(p.value.rows()));
  h.add(static_cast<std::uint64_t>(p.value.cols()));
  h.add(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(p.value.data()),
                                      static_cast<std::size_t>(p.value.size()) * sizeof(double)));
}

}  // namespace

std::uint64_t Backbone::hash() const {
  Fnv1a h;
  for (const nn::Param* p : params()) hash_param(h, *p);
  return h.value();
}

DomainDiscriminator::DomainDiscriminator(int feature_dim, int hidden_units, std::uint64_t seed)
    : hidden("discriminator.hidden", feature_dim, hidden_units),
      output("discriminator.output", hidden_units, 2) {
  Rng rng(derive_seed(seed, "discriminator_init"));
  hidden.init_normal(rng, std::sqrt(2.0 / feature_dim));
  output.init_normal(rng, std::sqrt(1.0 / hidden_units));
}

std::vector<nn::Param*> DomainDiscriminator::params() {
  return {&hidden.weight, &hidden.bias, &output.weight, &output.bias};
}

// -- Input pipeline --------------------------------------------------------

Image augment_image(const Image& image, const AugmentationConfig& config, Rng& rng) {
  // Every draw happens regardless of which transforms are enabled so the
  // random stream stays aligned across configurations.
  const bool flip = rng.uniform() < 0.5;
  const double scale = rng.uniform(config.scale_min, config.scale_max);
  const double brightness = rng.uniform(1.0 - config.color_jitter, 1.0 + config.color_jitter);
  const double contrast = rng.uniform(1.0 - config.color_jitter, 1.0 + config.color_jitter);
  const double saturation = rng.uniform(1.0 - config.color_jitter, 1.0 + config.color_jitter);

  Image out = (config.horizontal_flip && flip) ? flip_horizontal(image) : image;
  if (config.scale_max > config.scale_min && scale != 1.0) out = scale_about_center(out, scale);
  if (config.color_jitter > 0.0) {
    double mean_luma = 0.0;
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x) mean_luma += luma(out, y, x);
    }
    mean_luma /= static_cast<double>(out.height()) * out.width();
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x) {
        const double l = luma(out, y, x) * brightness;
        for (int c = 0; c < 3; ++c) {
          double v = out.at(y, x, c) * brightness;
          v = l + (v - l) * saturation;
          v = (v - mean_luma * brightness) * contrast + mean_luma * brightness;
          out.at(y, x, c) = std::clamp(v, 0.0, 1.0);
        }
      }
    }
  }
  return out;
}

Matrix pack_batch(const std::vector<const Image*>& images, bool normalize) {
  if (images.empty()) throw Error("nn.shape", "empty batch");
  const int h = images.front()->height();
  const int w = images.front()->width();
  const int pos = h * w;
  Matrix x(3, static_cast<Eigen::Index>(images.size()) * pos);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = *images[n];
    if (img.height() != h || img.width() != w || img.channels() != 3) {
      throw Error("nn.shape", "batch images must share one RGB shape");
    }
    const double* px = img.data().data();
    for (int p = 0; p < pos; ++p) {
      for (int c = 0; c < 3; ++c) {
        double v = px[p * 3 + c];
        if (normalize) v = (v - kChannelMean[c]) / kChannelStd[c];
        x(c, static_cast<Eigen::Index>(n) * pos + p) = v;
      }
    }
  }
  return x;
}

// -- TrainedModel ----------------------------------------------------------

Matrix TrainedModel::features_batch(const std::vector<const Image*>& images) const {
  Matrix out(backbone.feature_dim(), static_cast<Eigen::Index>(images.size()));
  for (std::size_t start = 0; start < images.size(); start += kInferenceChunk) {
    const std::size_t end = std::min(images.size(), start + kInferenceChunk);
    std::vector<const Image*> chunk(images.begin() + start, images.begin() + end);
    for (const Image* img : chunk) {
      if (img->height() != resolution || img->width() != resolution) {
        throw Error("training.resolution",
                    "image is " + std::to_string(img->height()) + "x" +
                        std::to_string(img->width()) + " but the model expects " +
                        std::to_string(resolution) + "x" + std::to_string(resolution));
      }
    }
    const nn::Geometry g{static_cast<int>(chunk.size()), 3, resolution, resolution};
    const Matrix f = backbone.forward(pack_batch(chunk, config.augment.normalize), g, nullptr);
    out.middleCols(static_cast<Eigen::Index>(start), f.cols()) = f;
  }
  return out;
}

Matrix TrainedModel::logits_batch(const std::vector<const Image*>& images) const {
  return head_n.linear.forward(features_batch(images));
}

std::vector<double> TrainedModel::logits(const Image& image) const {
  const Matrix l = logits_batch({&image});
  std::vector<double> out(static_cast<std::size_t>(l.rows()));
  for (Eigen::Index k = 0; k < l.rows(); ++k) out[k] = l(k, 0);
  return out;
}

std::vector<int> TrainedModel::predict_set(std::string_view, const DomainDataset& dataset) const {
  return predict_batch(*this, dataset);
}

std::uint64_t TrainedModel::hash() const {
  Fnv1a h;
  h.add(scheme);
  for (const nn::Param* p : backbone.params()) hash_param(h, *p);
  hash_param(h, head_n.linear.weight);
  hash_param(h, head_n.linear.bias);
  return h.value();
}

std::string TrainedModel::identity() const { return "model:" + hex64(hash()); }

int predict(const TrainedModel& model, const Image& image) {
  return nn::argmax(model.logits(image));
}

std::vector<int> predict_batch(const TrainedModel& model, const DomainDataset& dataset) {
  std::vector<const Image*> images;
  images.reserve(dataset.size());
  for (const auto& s : dataset.samples()) images.push_back(&s.pixels);
  if (images.empty()) return {};
  const Matrix l = model.logits_batch(images);
  std::vector<int> out(images.size());
  std::vector<double> column(static_cast<std::size_t>(l.rows()));
  for (Eigen::Index n = 0; n < l.cols(); ++n) {
    for (Eigen::Index k = 0; k < l.rows(); ++k) column[k] = l(k, n);
    out[n] = nn::argmax(column);
  }
  return out;
}

double domain_probe_accuracy(const TrainedModel& model, const DomainDataset& a,
                             const DomainDataset& b) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error("training.probe", "domain probe needs at least two samples per domain");
  }
  auto features_of = [&](const DomainDataset& d) {
    std::vector<const Image*> images;
    for (const auto& s : d.samples()) images.push_back(&s.pixels);
    return model.features_batch(images);
  };
  const Matrix fa = features_of(a);
  const Matrix fb = features_of(b);
  const Eigen::Index dim = fa.rows();
  const Eigen::Index fit_a = fa.cols() / 2;
  const Eigen::Index fit_b = fb.cols() / 2;

  Matrix fit(dim, fit_a + fit_b);
  fit << fa.leftCols(fit_a), fb.leftCols(fit_b);
  std::vector<double> y(static_cast<std::size_t>(fit.cols()), 0.0);
  for (Eigen::Index i = fit_a; i < fit.cols(); ++i) y[i] = 1.0;

  Eigen::VectorXd mean = fit.rowwise().mean();
  Eigen::VectorXd stddev(dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    const double var = (fit.row(r).array() - mean(r)).square().mean();
    stddev(r) = std::sqrt(var) + 1e-8;
  }
  auto standardize = [&](const Matrix& m) {
    Matrix s = m;
    for (Eigen::Index r = 0; r < dim; ++r) s.row(r) = (m.row(r).array() - mean(r)) / stddev(r);
    return s;
  };
  const Matrix xs = standardize(fit);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
  double bias = 0.0;
  const double lr = 0.5;
  const double l2 = 1e-3;
  const double n = static_cast<double>(xs.cols());
  for (int iter = 0; iter < 500; ++iter) {
    Eigen::VectorXd gw = Eigen::VectorXd::Zero(dim);
    double gb = 0.0;
    for (Eigen::Index i = 0; i < xs.cols(); ++i) {
      const double z = w.dot(xs.col(i)) + bias;
      const double p = 1.0 / (1.0 + std::exp(-z));
      gw += (p - y[i]) * xs.col(i);
      gb += p - y[i];
    }
    w -= lr * (gw / n + l2 * w);
    bias -= lr * gb / n;
  }

  int correct = 0;
  int total = 0;
  auto score = [&](const Matrix& f, Eigen::Index from, double label) {
    const Matrix s = standardize(f);
    for (Eigen::Index i = from; i < s.cols(); ++i) {
      const double z = w.dot(s.col(i)) + bias;
      if ((z > 0.0 ? 1.0 : 0.0) == label) ++correct;
      ++total;
    }
  };
  score(fa, fit_a, 0.0);
  score(fb, fit_b, 1.0);
  return static_cast<double>(correct) / total;
}

std::vector<stylization::FeatureLayer> ModelFeatureExtractor::extract(const Image& image) const {
  if (image.height() != model_.resolution || image.width() != model_.resolution) {
    throw Error("training.resolution", "feature extraction at the wrong resolution");
  }
  ForwardCache cache;
  const nn::Geometry g{1, 3, image.height(), image.width()};
  model_.backbone.forward(pack_batch({&image}, model_.config.augment.normalize), g, &cache);
  std::vector<stylization::FeatureLayer> layers;
  for (std::size_t i = 0; i < cache.units.size(); ++i) {
    layers.push_back({"unit" + std::to_string(i), Eigen::MatrixXd(cache.units[i].output)});
  }
  return layers;
}

}  // namespace styleshift::training
