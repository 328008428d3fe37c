#include "styleshift/corruptions.hpp"

#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>

#include "filters.hpp"
#include "severity_tables.hpp"
#include "styleshift/error.hpp"
#include "styleshift/random.hpp"

namespace styleshift::corruptions {

namespace t = tables;

std::string_view to_string(Category category) {
  switch (category) {
    case Category::noise: return "noise";
    case Category::blur: return "blur";
    case Category::weather: return "weather";
    case Category::digital: return "digital";
  }
  return "noise";
}

Category parse_category(std::string_view text) {
  for (Category c : kCategories) {
    if (to_string(c) == text) return c;
  }
  throw Error("corruption.category", "unknown category '" + std::string(text) + "'");
}

namespace {

struct Entry {
  const char* name;
  Category category;
  bool stochastic;
};

constexpr Entry kEntries[] = {
    {"gaussian_noise", Category::noise, true},
    {"shot_noise", Category::noise, true},
    {"impulse_noise", Category::noise, true},
    {"defocus_blur", Category::blur, false},
    {"glass_blur", Category::blur, true},
    {"motion_blur", Category::blur, false},
    {"zoom_blur", Category::blur, false},
    {"snow", Category::weather, true},
    {"frost", Category::weather, true},
    {"fog", Category::weather, false},
    {"brightness", Category::weather, false},
    {"contrast", Category::digital, false},
    {"elastic_transform", Category::digital, true},
    {"pixelate", Category::digital, false},
    {"jpeg_compression", Category::digital, false},
};

const Entry& lookup(std::string_view name) {
  for (const auto& e : kEntries) {
    if (name == e.name) return e;
  }
  throw Error("corruption.spec", "unknown corruption '" + std::string(name) + "'");
}

}  // namespace

const std::vector<std::string>& corruption_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& e : kEntries) v.emplace_back(e.name);
    return v;
  }();
  return names;
}

std::vector<std::string> corruptions_in(Category category) {
  std::vector<std::string> out;
  for (const auto& e : kEntries) {
    if (e.category == category) out.emplace_back(e.name);
  }
  return out;
}

Category category_of(std::string_view name) { return lookup(name).category; }
bool is_stochastic(std::string_view name) { return lookup(name).stochastic; }
std::string_view severity_table_version() { return t::kSeverityTableVersion; }

CorruptionSpec CorruptionSpec::make(std::string_view name, int severity) {
  const Entry& e = lookup(name);
  if (severity < kMinSeverity || severity > kMaxSeverity) {
    throw Error("corruption.spec", "severity " + std::to_string(severity) + " for '" +
                                       std::string(name) + "' outside [1, 5]");
  }
  return CorruptionSpec{e.name, e.category, severity};
}

CorruptionSpec CorruptionSpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw Error("corruption.spec", "expected name:severity, got '" + std::string(text) + "'");
  }
  const std::string sev(text.substr(colon + 1));
  int severity = 0;
  try {
    std::size_t used = 0;
    severity = std::stoi(sev, &used);
    if (used != sev.size()) throw std::invalid_argument(sev);
  } catch (const std::exception&) {
    throw Error("corruption.spec", "bad severity '" + sev + "'");
  }
  return make(text.substr(0, colon), severity);
}

std::string CorruptionSpec::key() const { return name + ":" + std::to_string(severity); }

std::vector<CorruptionSpec> all_specs() {
  std::vector<CorruptionSpec> specs;
  for (const auto& e : kEntries) {
    for (int s = kMinSeverity; s <= kMaxSeverity; ++s) specs.push_back(CorruptionSpec::make(e.name, s));
  }
  return specs;
}

namespace {

double spatial_scale(const Image& image) {
  return std::max(image.height(), image.width()) / t::kReferenceSide;
}

Image gaussian_noise(const Image& x, int s, Rng& rng) {
  Image out = x;
  for (double& v : out.data()) v += rng.normal(0.0, t::kGaussianNoise[s]);
  return out;
}

Image shot_noise(const Image& x, int s, Rng& rng) {
  const double c = t::kShotNoise[s];
  Image out = x;
  for (double& v : out.data()) {
    v = static_cast<double>(rng.poisson(std::max(v, 0.0) * c)) / c;
  }
  return out;
}

Image impulse_noise(const Image& x, int s, Rng& rng) {
  const double amount = t::kImpulseNoise[s];
  Image out = x;
  for (double& v : out.data()) {
    const bool flipped = rng.uniform() <= amount;
    const bool salted = rng.uniform() <= 0.5;
    if (flipped) v = salted ? 1.0 : 0.0;
  }
  return out;
}

Image defocus_blur(const Image& x, int s) {
  const double scale = spatial_scale(x);
  const auto p = t::kDefocusBlur[s];
  return convolve2d(x, disk_kernel(p.radius * scale, p.alias_sigma * scale));
}

Image glass_blur(const Image& x, int s, Rng& rng) {
  const double scale = spatial_scale(x);
  const auto p = t::kGlassBlur[s];
  const double sigma = p.sigma * scale;
  // Below one pixel of reach the displacement becomes a swap probability,
  // which keeps the distortion growing with severity at low resolution.
  const double reach = p.max_delta * scale;
  const int delta = std::max(1, static_cast<int>(std::lround(reach)));
  const double swap_probability = std::min(1.0, reach);
  Image out = gaussian_blur(x, sigma);
  const int h = out.height();
  const int w = out.width();
  for (int it = 0; it < p.iterations; ++it) {
    for (int y = h - delta; y > delta; --y) {
      for (int xx = w - delta; xx > delta; --xx) {
        const int dx = static_cast<int>(rng.uniform_int(-delta, delta - 1));
        const int dy = static_cast<int>(rng.uniform_int(-delta, delta - 1));
        if (swap_probability < 1.0 && rng.uniform() >= swap_probability) continue;
        const int y2 = y + dy;
        const int x2 = xx + dx;
        for (int c = 0; c < out.channels(); ++c) std::swap(out.at(y, xx, c), out.at(y2, x2, c));
      }
    }
  }
  return gaussian_blur(out, sigma);
}

Image motion_blur_corruption(const Image& x, int s) {
  const double scale = spatial_scale(x);
  const auto p = t::kMotionBlur[s];
  const int radius = std::max(1, static_cast<int>(std::lround(p.radius * scale)));
  return motion_blur(x, radius, std::max(p.sigma * scale, 1e-3), t::kMotionAngleDegrees);
}

Image zoom_blur(const Image& x, int s) {
  const auto p = t::kZoomBlur[s];
  Image acc = x;
  int count = 1;
  // Same sample points as arange(start, stop, step).
  const int n = static_cast<int>(std::ceil((p.stop - p.start) / p.step - 1e-9));
  for (int i = 0; i < n; ++i) {
    const double zoom = p.start + i * p.step;
    const Image z = clipped_zoom(x, zoom);
    auto a = acc.data();
    auto b = z.data();
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
    ++count;
  }
  for (double& v : acc.data()) v /= count;
  return acc;
}

Image gray_plane(const Image& x) {
  Image g(x.height(), x.width(), 1);
  for (int y = 0; y < x.height(); ++y) {
    for (int xx = 0; xx < x.width(); ++xx) {
      g.at(y, xx, 0) = 0.299 * x.at(y, xx, 0) + 0.587 * x.at(y, xx, 1) + 0.114 * x.at(y, xx, 2);
    }
  }
  return g;
}

Image snow(const Image& x, int s, Rng& rng) {
  const double scale = spatial_scale(x);
  const auto p = t::kSnow[s];
  const int h = x.height();
  const int w = x.width();
  Image layer(h, w, 1);
  for (double& v : layer.data()) v = rng.normal(p.loc, p.scale);
  layer = clipped_zoom(layer, p.zoom);
  for (double& v : layer.data()) {
    if (v < p.threshold) v = 0.0;
    v = std::clamp(v, 0.0, 1.0);
  }
  const double angle = rng.uniform(-135.0, -45.0);
  const int radius = std::max(1, static_cast<int>(std::lround(p.blur_radius * scale)));
  layer = motion_blur(layer, radius, std::max(p.blur_sigma * scale, 1e-3), angle);

  const Image gray = gray_plane(x);
  Image out(h, w, x.channels());
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const double lift = gray.at(y, xx, 0) * 1.5 + 0.5;
      const double flakes = layer.at(y, xx, 0) + layer.at(h - 1 - y, w - 1 - xx, 0);
      for (int c = 0; c < x.channels(); ++c) {
        const double v = x.at(y, xx, c);
        out.at(y, xx, c) = p.blend * v + (1.0 - p.blend) * std::max(v, lift) + flakes;
      }
    }
  }
  return out;
}

// Procedural frost: a coarse fractal ice sheet plus fine crystalline grain,
// contrast-stretched and tinted towards blue-white.
Image frost_texture(int h, int w, Rng& rng) {
  const int size = next_power_of_two(std::max(h, w));
  const auto coarse = plasma_fractal(size, 2.0, rng.next());
  Image grain(h, w, 1);
  for (double& v : grain.data()) v = rng.uniform();
  grain = gaussian_blur(grain, 0.6 * std::max(1.0, std::max(h, w) / 64.0));
  double gmin = 1e300;
  double gmax = -1e300;
  for (double v : grain.data()) {
    gmin = std::min(gmin, v);
    gmax = std::max(gmax, v);
  }
  static constexpr double kTint[3] = {0.86, 0.93, 1.0};
  Image frost(h, w, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double g = gmax > gmin ? (grain.at(y, x, 0) - gmin) / (gmax - gmin) : 0.0;
      const double ice = 0.6 * coarse[static_cast<std::size_t>(y) * size + x] + 0.4 * g;
      const double v = std::clamp((ice - 0.2) * 1.6, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) frost.at(y, x, c) = v * kTint[c];
    }
  }
  return frost;
}

Image frost(const Image& x, int s, Rng& rng) {
  const auto p = t::kFrost[s];
  const Image f = frost_texture(x.height(), x.width(), rng);
  Image out = x;
  auto o = out.data();
  auto fd = f.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = p.image_weight * o[i] + p.frost_weight * fd[i % fd.size()];
  }
  return out;
}

// Fog is deterministic: the fractal comes from a fixed seed, so every image
// and severity sees the same field and only its roughness and weight change.
Image fog(const Image& x, int s) {
  const auto p = t::kFog[s];
  const int h = x.height();
  const int w = x.width();
  const int size = next_power_of_two(std::max(h, w));
  const auto plasma = plasma_fractal(size, p.wibble_decay, derive_seed(0, "fog_plasma"));
  double max_val = 0.0;
  for (double v : x.data()) max_val = std::max(max_val, v);
  Image out(h, w, x.channels());
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const double f = p.strength * plasma[static_cast<std::size_t>(y) * size + xx];
      for (int c = 0; c < x.channels(); ++c) {
        out.at(y, xx, c) = (x.at(y, xx, c) + f) * max_val / (max_val + p.strength);
      }
    }
  }
  return out;
}

Image brightness(const Image& x, int s) {
  const double add = t::kBrightness[s];
  Image out = x;
  for (int y = 0; y < x.height(); ++y) {
    for (int xx = 0; xx < x.width(); ++xx) {
      const double r = std::clamp(x.at(y, xx, 0), 0.0, 1.0);
      const double g = std::clamp(x.at(y, xx, 1), 0.0, 1.0);
      const double b = std::clamp(x.at(y, xx, 2), 0.0, 1.0);
      const double v = std::max({r, g, b});
      const double v2 = std::min(v + add, 1.0);
      // Hue and saturation are unchanged, so RGB scales with V.
      if (v > 0.0) {
        const double k = v2 / v;
        out.at(y, xx, 0) = r * k;
        out.at(y, xx, 1) = g * k;
        out.at(y, xx, 2) = b * k;
      } else {
        out.at(y, xx, 0) = out.at(y, xx, 1) = out.at(y, xx, 2) = v2;
      }
    }
  }
  return out;
}

Image contrast(const Image& x, int s) {
  const double factor = t::kContrast[s];
  Image out = x;
  for (int c = 0; c < x.channels(); ++c) {
    auto plane = x.channel(c);
    double mean = 0.0;
    for (double v : plane) mean += v;
    mean /= static_cast<double>(plane.size());
    for (double& v : plane) v = (v - mean) * factor + mean;
    out.set_channel(c, plane);
  }
  return out;
}

double sample_reflect(const Image& img, double sy, double sx, int c) {
  const int h = img.height();
  const int w = img.width();
  const int y0 = static_cast<int>(std::floor(sy));
  const int x0 = static_cast<int>(std::floor(sx));
  const double fy = sy - y0;
  const double fx = sx - x0;
  auto px = [&](int y, int x) { return img.at(reflect_index(y, h), reflect_index(x, w), c); };
  return (1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x0 + 1)) +
         fy * ((1 - fx) * px(y0 + 1, x0) + fx * px(y0 + 1, x0 + 1));
}

Image elastic_transform(const Image& x, int s, Rng& rng) {
  const auto p = t::kElastic[s];
  const int h = x.height();
  const int w = x.width();
  const double side = std::max(h, w);
  Image field(h, w, 2);
  for (double& v : field.data()) v = rng.uniform(-1.0, 1.0);
  field = gaussian_blur(field, p.smoothness * side);
  double sq = 0.0;
  for (double v : field.data()) sq += v * v;
  const double rms = std::sqrt(sq / static_cast<double>(field.size()));
  const double gain = rms > 0.0 ? p.amplitude * side / rms : 0.0;
  Image out(h, w, x.channels());
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const double sy = y + gain * field.at(y, xx, 0);
      const double sx = xx + gain * field.at(y, xx, 1);
      for (int c = 0; c < x.channels(); ++c) out.at(y, xx, c) = sample_reflect(x, sy, sx, c);
    }
  }
  return out;
}

Image pixelate(const Image& x, int s) {
  const double f = t::kPixelate[s];
  const int h = std::max(1, static_cast<int>(x.height() * f));
  const int w = std::max(1, static_cast<int>(x.width() * f));
  return resize_box(resize_box(x, h, w), x.height(), x.width());
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

// Encodes and decodes through libjpeg. Only trivially destructible locals
// live in this frame because libjpeg reports errors through longjmp.
bool jpeg_roundtrip(const std::uint8_t* in, std::uint8_t* out, int width, int height,
                    int quality) {
  unsigned char* buffer = nullptr;
  unsigned long buffer_size = 0;
  jpeg_compress_struct cinfo{};
  jpeg_decompress_struct dinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  dinfo.err = &err.base;
  err.base.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    jpeg_destroy_decompress(&dinfo);
    std::free(buffer);
    return false;
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buffer, &buffer_size);
  cinfo.image_width = static_cast<JDIMENSION>(width);
  cinfo.image_height = static_cast<JDIMENSION>(height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(in + static_cast<std::size_t>(cinfo.next_scanline) * width * 3);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);

  jpeg_create_decompress(&dinfo);
  jpeg_mem_src(&dinfo, buffer, buffer_size);
  jpeg_read_header(&dinfo, TRUE);
  dinfo.out_color_space = JCS_RGB;
  dinfo.dct_method = JDCT_ISLOW;
  jpeg_start_decompress(&dinfo);
  while (dinfo.output_scanline < dinfo.output_height) {
    JSAMPROW row = out + static_cast<std::size_t>(dinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&dinfo, &row, 1);
  }
  jpeg_finish_decompress(&dinfo);
  jpeg_destroy_decompress(&dinfo);
  std::free(buffer);
  return true;
}

Image jpeg_compression(const Image& x, int s) {
  const auto bytes = x.to_bytes();
  std::vector<std::uint8_t> decoded(bytes.size());
  if (!jpeg_roundtrip(bytes.data(), decoded.data(), x.width(), x.height(),
                      t::kJpegQuality[s])) {
    throw Error("corruption.jpeg", "JPEG round trip failed");
  }
  return Image::from_bytes(decoded, x.height(), x.width(), 3);
}

}  // namespace

Image apply_corruption(const Image& image, const CorruptionSpec& spec, std::uint64_t seed) {
  const CorruptionSpec checked = CorruptionSpec::make(spec.name, spec.severity);
  if (image.channels() != 3 || image.empty()) {
    throw Error("corruption.image", "corruptions expect a non-empty RGB image");
  }
  const int s = checked.severity - 1;
  Rng rng(seed);
  const std::string& n = checked.name;
  Image out;
  if (n == "gaussian_noise") out = gaussian_noise(image, s, rng);
  else if (n == "shot_noise") out = shot_noise(image, s, rng);
  else if (n == "impulse_noise") out = impulse_noise(image, s, rng);
  else if (n == "defocus_blur") out = defocus_blur(image, s);
  else if (n == "glass_blur") out = glass_blur(image, s, rng);
  else if (n == "motion_blur") out = motion_blur_corruption(image, s);
  else if (n == "zoom_blur") out = zoom_blur(image, s);
  else if (n == "snow") out = snow(image, s, rng);
  else if (n == "frost") out = frost(image, s, rng);
  else if (n == "fog") out = fog(image, s);
  else if (n == "brightness") out = brightness(image, s);
  else if (n == "contrast") out = contrast(image, s);
  else if (n == "elastic_transform") out = elastic_transform(image, s, rng);
  else if (n == "pixelate") out = pixelate(image, s);
  else out = jpeg_compression(image, s);
  out.clamp();
  return out;
}

std::uint64_t sample_seed(std::uint64_t master_seed, const CorruptionSpec& spec,
                          std::string_view sample_id) {
  Fnv1a h;
  h.add(master_seed).add(std::string_view(spec.name))
      .add(static_cast<std::uint64_t>(spec.severity)).add(sample_id);
  return splitmix64(h.value());
}

CorruptedSet corrupt_set(const DomainDataset& test, const CorruptionSpec& spec,
                         std::uint64_t master_seed) {
  CorruptedSet set{spec, DomainDataset(test.num_classes(), test.domain(), test.resolution())};
  for (const auto& sample : test.samples()) {
    ImageSample c = sample;
    c.pixels = apply_corruption(sample.pixels, spec, sample_seed(master_seed, spec, sample.id));
    c.image_path.clear();
    set.samples.add(std::move(c));
  }
  return set;
}

std::vector<CorruptedSet> corrupt_dataset(const DomainDataset& test,
                                          const std::vector<CorruptionSpec>& specs,
                                          std::uint64_t master_seed) {
  if (test.empty()) throw Error("corruption.empty", "cannot corrupt an empty test set");
  std::vector<CorruptedSet> sets;
  sets.reserve(specs.size());
  for (const auto& spec : specs) sets.push_back(corrupt_set(test, spec, master_seed));
  return sets;
}

}  // namespace styleshift::corruptions
