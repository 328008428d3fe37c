#include "styleshift/stylization.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "styleshift/error.hpp"

namespace fs = std::filesystem;

namespace styleshift::stylization {

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::painting_pool: return "painting_pool";
    case PolicyKind::intradomain_unrestricted: return "intradomain_unrestricted";
    case PolicyKind::intradomain_intraclass: return "intradomain_intraclass";
  }
  return "intradomain_unrestricted";
}

PolicyKind parse_policy(std::string_view text) {
  if (text == "painting" || text == "painting_pool") return PolicyKind::painting_pool;
  if (text == "intradomain" || text == "intradomain_unrestricted") {
    return PolicyKind::intradomain_unrestricted;
  }
  if (text == "intraclass" || text == "intradomain_intraclass") {
    return PolicyKind::intradomain_intraclass;
  }
  throw Error("style.policy", "unknown style policy '" + std::string(text) + "'");
}

std::size_t sample_style_index(const ImageSample& content, const DomainDataset& pool,
                               const StylePolicy& policy, Rng& rng) {
  if (pool.empty()) throw Error("style.pool", "style pool is empty");
  std::vector<std::size_t> eligible;
  switch (policy.kind) {
    case PolicyKind::painting_pool:
      if (pool.domain() != Domain::painting) {
        throw Error("style.pool", "painting_pool policy requires a painting dataset");
      }
      for (std::size_t i = 0; i < pool.size(); ++i) eligible.push_back(i);
      break;
    case PolicyKind::intradomain_unrestricted:
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (policy.exclude_self && pool[i].id == content.id) continue;
        eligible.push_back(i);
      }
      break;
    case PolicyKind::intradomain_intraclass:
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool[i].label != content.label) continue;
        if (policy.exclude_self && pool[i].id == content.id) continue;
        eligible.push_back(i);
      }
      break;
  }
  if (eligible.empty()) {
    if (policy.kind == PolicyKind::intradomain_intraclass) {
      throw Error("style.singleton_class",
                  "no eligible style image for '" + content.id + "': class " +
                      std::to_string(content.label) + " has no other member");
    }
    throw Error("style.pool", "no eligible style image for '" + content.id + "'");
  }
  return eligible[rng.uniform_int(eligible.size())];
}

const ImageSample& sample_style(const ImageSample& content, const DomainDataset& pool,
                                const StylePolicy& policy, Rng& rng) {
  return pool[sample_style_index(content, pool, policy, rng)];
}

// -- Codecs ----------------------------------------------------------------

Eigen::MatrixXd RawPixelCodec::encode(const Image& image) const {
  const int positions = image.height() * image.width();
  Eigen::MatrixXd f(image.channels(), positions);
  auto data = image.data();
  for (int p = 0; p < positions; ++p) {
    for (int c = 0; c < image.channels(); ++c) f(c, p) = data[p * image.channels() + c];
  }
  return f;
}

Image RawPixelCodec::decode(const Eigen::MatrixXd& features, int height, int width) const {
  Image image(height, width, static_cast<int>(features.rows()));
  auto data = image.data();
  for (Eigen::Index p = 0; p < features.cols(); ++p) {
    for (Eigen::Index c = 0; c < features.rows(); ++c) data[p * features.rows() + c] = features(c, p);
  }
  return image;
}

const Eigen::Matrix3d& DecorrelatedColorCodec::basis() {
  static const Eigen::Matrix3d m = [] {
    Eigen::Matrix3d b;
    const double a = 1.0 / std::sqrt(3.0);
    const double d = 1.0 / std::sqrt(6.0);
    const double e = 1.0 / std::sqrt(2.0);
    b << a, a, a,  //
        d, d, -2 * d,  //
        e, -e, 0;
    return b;
  }();
  return m;
}

Eigen::MatrixXd DecorrelatedColorCodec::encode(const Image& image) const {
  if (image.channels() != 3) throw Error("style.codec", "decorrelated colour needs RGB");
  return basis() * RawPixelCodec().encode(image);
}

Image DecorrelatedColorCodec::decode(const Eigen::MatrixXd& features, int height,
                                     int width) const {
  // The basis is orthonormal, so its inverse is the transpose.
  return RawPixelCodec().decode(basis().transpose() * features, height, width);
}

std::string_view to_string(FeatureSpace space) {
  switch (space) {
    case FeatureSpace::raw_pixels: return "raw_pixels";
    case FeatureSpace::decorrelated_color: return "decorrelated_color";
    case FeatureSpace::plugin_features: return "plugin_features";
  }
  return "decorrelated_color";
}

FeatureSpace parse_feature_space(std::string_view text) {
  if (text == "raw_pixels") return FeatureSpace::raw_pixels;
  if (text == "decorrelated_color") return FeatureSpace::decorrelated_color;
  if (text == "plugin_features") return FeatureSpace::plugin_features;
  throw Error("style.feature_space", "unknown feature space '" + std::string(text) + "'");
}

namespace {

const FeatureCodec& codec_for(const Stylizer& stylizer) {
  static const RawPixelCodec raw;
  static const DecorrelatedColorCodec decorrelated;
  switch (stylizer.feature_space) {
    case FeatureSpace::raw_pixels: return raw;
    case FeatureSpace::decorrelated_color: return decorrelated;
    case FeatureSpace::plugin_features:
      if (!stylizer.plugin) {
        throw Error("style.plugin", "plugin_features selected without a feature codec");
      }
      return *stylizer.plugin;
  }
  return decorrelated;
}

struct Moments {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
};

Moments channel_moments(const Eigen::MatrixXd& f) {
  Moments m;
  m.mean = f.rowwise().mean();
  const Eigen::MatrixXd centered = f.colwise() - m.mean;
  m.stddev = (centered.array().square().rowwise().sum() / static_cast<double>(f.cols())).sqrt();
  return m;
}

}  // namespace

StylizeOutput moment_match_detailed(const Image& content, const Image& style,
                                    const Stylizer& stylizer) {
  if (stylizer.kind != StylizerKind::moment_match) {
    throw Error("style.kind", "external stylizers are ingested, not run");
  }
  if (!(stylizer.strength >= 0.0 && stylizer.strength <= 1.0)) {
    throw Error("style.strength", "strength must lie in [0, 1]");
  }
  if (!content.same_shape(style)) {
    throw Error("style.shape", "content and style images must share a resolution");
  }
  StylizeOutput out;
  if (stylizer.strength == 0.0) {
    out.image = content;
    out.unclamped = content;
    return out;
  }
  const FeatureCodec& codec = codec_for(stylizer);
  const Eigen::MatrixXd fc = codec.encode(content);
  const Eigen::MatrixXd fs = codec.encode(style);
  const Moments mc = channel_moments(fc);
  const Moments ms = channel_moments(fs);

  Eigen::MatrixXd transferred(fc.rows(), fc.cols());
  for (Eigen::Index c = 0; c < fc.rows(); ++c) {
    double sigma_c = mc.stddev(c);
    if (sigma_c < kStdFloor) {
      out.diagnostics.push_back("content channel " + std::to_string(c) +
                                " has zero spread; using floor " + std::to_string(kStdFloor));
      sigma_c = kStdFloor;
    }
    transferred.row(c) =
        ((fc.row(c).array() - mc.mean(c)) * (ms.stddev(c) / sigma_c) + ms.mean(c)).matrix();
  }
  if (stylizer.strength < 1.0) {
    transferred = stylizer.strength * transferred + (1.0 - stylizer.strength) * fc;
  }
  out.unclamped = codec.decode(transferred, content.height(), content.width());
  out.image = out.unclamped;
  out.image.clamp();
  return out;
}

Image moment_match_stylize(const Image& content, const Image& style, const Stylizer& stylizer) {
  return moment_match_detailed(content, style, stylizer).image;
}

// -- Dataset-level ---------------------------------------------------------

std::string stylized_provenance(std::string_view content_id, std::string_view style_id) {
  return "content=" + std::string(content_id) + ";style=" + std::string(style_id);
}

std::string paired_content_id(const ImageSample& stylized) {
  const std::string& p = stylized.provenance;
  if (p.rfind("content=", 0) != 0) return {};
  const auto end = p.find(';');
  return p.substr(8, end == std::string::npos ? std::string::npos : end - 8);
}

StylizedDataset stylize_dataset(const DomainDataset& content, const DomainDataset& pool,
                                const StylePolicy& policy, const Stylizer& stylizer,
                                std::uint64_t master_seed) {
  StylizedDataset result{DomainDataset(content.num_classes(), Domain::stylized,
                                       content.resolution()),
                         {}};
  for (const auto& sample : content.samples()) {
    Rng rng(derive_seed(master_seed, "stylize_dataset", sample.id));
    std::size_t style_index = 0;
    try {
      style_index = sample_style_index(sample, pool, policy, rng);
    } catch (const Error& e) {
      throw Error(e.code(), "stylizing '" + sample.id + "': " + e.what());
    }
    const ImageSample& style = pool[style_index];
    ImageSample out;
    out.id = sample.id + ".sty";
    out.pixels = moment_match_stylize(sample.pixels, style.pixels, stylizer);
    out.label = sample.label;
    out.domain = Domain::stylized;
    out.provenance = stylized_provenance(sample.id, style.id);
    result.dataset.add(std::move(out));
    result.pairs.push_back({sample.id, style.id});
  }
  return result;
}

void save_pairing_table(const std::vector<Pairing>& pairs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("pairing.write", "cannot write pairing table '" + path + "'");
  out << "content_id\tstyle_id\n";
  for (const auto& p : pairs) out << p.content_id << '\t' << p.style_id << '\n';
}

std::vector<Pairing> load_pairing_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("pairing.open", "cannot open pairing table '" + path + "'");
  std::vector<Pairing> pairs;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error("pairing.malformed", "bad pairing line: " + line);
    pairs.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return pairs;
}

DomainDataset import_external_stylized(const std::string& pairing_manifest,
                                       const DomainDataset& content) {
  std::ifstream in(pairing_manifest);
  if (!in) throw Error("pairing.open", "cannot open pairing manifest '" + pairing_manifest + "'");
  const fs::path base = fs::path(pairing_manifest).parent_path();
  DomainDataset out(content.num_classes(), Domain::stylized, content.resolution());
  std::vector<std::string> diagnostics;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string where = pairing_manifest + ":" + std::to_string(line_no) + ": ";
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 3) {
      diagnostics.push_back(where + "expected content_id, style tag and image path");
      continue;
    }
    const auto index = content.find(fields[0]);
    if (!index) {
      diagnostics.push_back(where + "unknown content id '" + fields[0] + "'");
      continue;
    }
    fs::path image_path = fields[2];
    if (image_path.is_relative()) image_path = base / image_path;
    Image pixels;
    try {
      pixels = read_png(image_path.string());
    } catch (const Error& e) {
      diagnostics.push_back(where + e.what());
      continue;
    }
    if (pixels.height() != content.resolution() || pixels.width() != content.resolution()) {
      pixels = resize_bilinear(pixels, content.resolution(), content.resolution());
      pixels.clamp();
    }
    ImageSample s;
    s.id = fields[0] + ".sty";
    s.pixels = std::move(pixels);
    s.label = content[*index].label;
    s.domain = Domain::stylized;
    s.provenance = stylized_provenance(fields[0], fields[1]);
    s.image_path = fields[2];
    if (out.find(s.id)) {
      diagnostics.push_back(where + "content id '" + fields[0] + "' paired twice");
      continue;
    }
    out.add(std::move(s));
  }
  if (!diagnostics.empty()) throw RecordError("pairing.malformed", std::move(diagnostics));
  return out;
}

// -- Gram distance ---------------------------------------------------------

std::vector<FeatureLayer> PixelFeatures::extract(const Image& image) const {
  return {{"pixels", RawPixelCodec().encode(image)}};
}

namespace {

Image average_pool2(const Image& image) {
  const int h = std::max(1, image.height() / 2);
  const int w = std::max(1, image.width() / 2);
  Image out(h, w, image.channels());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < image.channels(); ++c) {
        double acc = 0.0;
        int n = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int sy = 2 * y + dy;
            const int sx = 2 * x + dx;
            if (sy < image.height() && sx < image.width()) {
              acc += image.at(sy, sx, c);
              ++n;
            }
          }
        }
        out.at(y, x, c) = acc / n;
      }
    }
  }
  return out;
}

// Colour, horizontal/vertical central differences and squared local
// contrast per colour channel.
Eigen::MatrixXd bank_responses(const Image& image) {
  const int h = image.height();
  const int w = image.width();
  const int ch = image.channels();
  Eigen::MatrixXd f(4 * ch, h * w);
  auto px = [&](int y, int x, int c) {
    return image.at(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1), c);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int p = y * w + x;
      for (int c = 0; c < ch; ++c) {
        const double v = px(y, x, c);
        const double gx = 0.5 * (px(y, x + 1, c) - px(y, x - 1, c));
        const double gy = 0.5 * (px(y + 1, x, c) - px(y - 1, x, c));
        const double local = 0.25 * (px(y, x + 1, c) + px(y, x - 1, c) + px(y + 1, x, c) +
                                     px(y - 1, x, c));
        f(c, p) = v;
        f(ch + c, p) = gx;
        f(2 * ch + c, p) = gy;
        f(3 * ch + c, p) = (v - local) * (v - local);
      }
    }
  }
  return f;
}

}  // namespace

std::vector<FeatureLayer> FilterBankFeatures::extract(const Image& image) const {
  std::vector<FeatureLayer> layers;
  Image level = image;
  for (int scale = 0; scale < 3; ++scale) {
    layers.push_back({"bank_s" + std::to_string(scale), bank_responses(level)});
    if (level.height() < 4 || level.width() < 4) break;
    level = average_pool2(level);
  }
  return layers;
}

GramDescriptor gram_descriptor(const Image& image, const FeatureExtractor& features,
                               GramNormalization normalization) {
  std::vector<FeatureLayer> layers;
  try {
    layers = features.extract(image);
  } catch (const Error& e) {
    throw Error(e.code(), "feature extractor '" + features.name() + "': " + e.what());
  }
  if (layers.empty()) {
    throw Error("gram.features", "feature extractor '" + features.name() + "' yielded no layers");
  }
  GramDescriptor d;
  for (auto& layer : layers) {
    Eigen::MatrixXd g = layer.features * layer.features.transpose();
    if (normalization == GramNormalization::channel_spatial) {
      g /= static_cast<double>(layer.features.rows() * layer.features.cols());
    }
    d.layers.push_back(layer.name);
    d.grams.push_back(std::move(g));
  }
  return d;
}

double gram_distance(const Image& a, const Image& b, const FeatureExtractor& features,
                     GramNormalization normalization) {
  if (!a.same_shape(b)) throw Error("gram.shape", "gram_distance: images differ in shape");
  const GramDescriptor ga = gram_descriptor(a, features, normalization);
  const GramDescriptor gb = gram_descriptor(b, features, normalization);
  if (ga.grams.size() != gb.grams.size()) {
    throw Error("gram.features", "feature extractor returned differing layer counts");
  }
  double total = 0.0;
  for (std::size_t l = 0; l < ga.grams.size(); ++l) {
    if (ga.grams[l].rows() != gb.grams[l].rows()) {
      throw Error("gram.features", "layer '" + ga.layers[l] + "' changed channel count");
    }
    total += (ga.grams[l] - gb.grams[l]).norm();
  }
  return total;
}

DistanceSummary summarize(const std::vector<double>& values) {
  if (values.empty()) throw Error("stats.empty", "cannot summarize an empty list");
  DistanceSummary s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

DistanceSummary mean_pair_distance(const std::vector<std::pair<Image, Image>>& pairs,
                                   const FeatureExtractor& features,
                                   GramNormalization normalization) {
  if (pairs.empty()) throw Error("gram.empty", "mean_pair_distance needs at least one pair");
  std::vector<double> d;
  d.reserve(pairs.size());
  for (const auto& [a, b] : pairs) d.push_back(gram_distance(a, b, features, normalization));
  return summarize(d);
}

}  // namespace styleshift::stylization
