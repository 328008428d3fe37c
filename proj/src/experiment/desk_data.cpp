#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "styleshift/corruptions.hpp"
#include "styleshift/error.hpp"
#include "styleshift/experiment.hpp"

#ifndef STYLESHIFT_DATA_DIR
#define STYLESHIFT_DATA_DIR "data"
#endif

namespace styleshift::experiment {

namespace {

std::string read_maybe_gzip(const std::string& path) {
  gzFile file = gzopen(path.c_str(), "rb");
  if (file == nullptr) throw Error("io.read", "cannot open " + path);
  std::string text;
  char buffer[1 << 15];
  int n = 0;
  while ((n = gzread(file, buffer, sizeof buffer)) > 0) text.append(buffer, n);
  const bool failed = n < 0;
  gzclose(file);
  if (failed) throw Error("io.read", "failed to decompress " + path);
  return text;
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double hh = h * 6.0;
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

double grid_value(const DigitRecord& d, int gy, int gx) {
  if (gy < 0 || gy > 7 || gx < 0 || gx > 7) return 0.0;
  return d.cells[gy * 8 + gx] / 16.0;
}

/// Digit intensity mask at the target resolution, bilinear from the 8x8 grid.
std::vector<double> digit_mask(const DigitRecord& d, int res, double cell, double cy, double cx) {
  std::vector<double> mask(static_cast<std::size_t>(res) * res);
  for (int y = 0; y < res; ++y) {
    const double gy = (y + 0.5 - cy) / cell + 4.0 - 0.5;
    const int y0 = static_cast<int>(std::floor(gy));
    const double fy = gy - y0;
    for (int x = 0; x < res; ++x) {
      const double gx = (x + 0.5 - cx) / cell + 4.0 - 0.5;
      const int x0 = static_cast<int>(std::floor(gx));
      const double fx = gx - x0;
      const double top = grid_value(d, y0, x0) * (1 - fx) + grid_value(d, y0, x0 + 1) * fx;
      const double bottom =
          grid_value(d, y0 + 1, x0) * (1 - fx) + grid_value(d, y0 + 1, x0 + 1) * fx;
      mask[static_cast<std::size_t>(y) * res + x] = top * (1 - fy) + bottom * fy;
    }
  }
  return mask;
}

std::vector<double> resample_plasma(const std::vector<double>& plasma, int size, int res) {
  std::vector<double> out(static_cast<std::size_t>(res) * res);
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      out[static_cast<std::size_t>(y) * res + x] =
          plasma[static_cast<std::size_t>(y * size / res) * size + x * size / res];
    }
  }
  return out;
}

int plasma_size(int res) {
  int size = 1;
  while (size < res) size *= 2;
  return size;
}

Image render_photo(const DigitRecord& d, bool ood, int res, Rng& rng) {
  const double cell = res / 8.0 * rng.uniform(0.72, 0.92);
  const double cy = res / 2.0 + rng.uniform(-0.06, 0.06) * res;
  const double cx = res / 2.0 + rng.uniform(-0.06, 0.06) * res;
  std::vector<double> mask = digit_mask(d, res, cell, cy, cx);
  if (ood) {
    for (double& m : mask) m = std::pow(m, 1.8);
  }

  const bool class_hue = !ood && rng.uniform() < 0.6;
  const double random_hue = rng.uniform();
  const double fg_hue = class_hue ? d.label / 10.0 + rng.normal(0.0, 0.05) : random_hue;
  const auto fg = hsv_to_rgb(fg_hue, rng.uniform(0.4, 0.95), rng.uniform(0.4, 1.0));
  const auto bg = hsv_to_rgb(rng.uniform(), rng.uniform(0.1, 0.45),
                             ood ? rng.uniform(0.35, 0.6) : rng.uniform(0.05, 0.5));
  const int psize = plasma_size(res);
  const auto clutter =
      resample_plasma(corruptions::plasma_fractal(psize, ood ? 1.6 : 2.4, rng.next()), psize, res);
  const double clutter_amp = rng.uniform(0.2, 0.7);
  const double tilt_y = rng.uniform(-0.3, 0.3);
  const double tilt_x = rng.uniform(-0.3, 0.3);
  const double grain = ood ? rng.uniform(0.0, 0.02) : rng.uniform(0.01, 0.08);

  Image img(res, res, 3);
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * res + x;
      const double m = std::clamp(mask[i], 0.0, 1.0);
      const double light =
          1.0 + tilt_y * (y + 0.5 - res / 2.0) / res + tilt_x * (x + 0.5 - res / 2.0) / res;
      const double texture = 1.0 + clutter_amp * (clutter[i] - 0.5);
      for (int c = 0; c < 3; ++c) {
        const double value = (bg[c] * texture * (1.0 - m) + fg[c] * m) * light;
        img.at(y, x, c) = value + rng.normal(0.0, grain);
      }
    }
  }
  img.clamp();
  return img;
}

Image render_painting(const DigitRecord& d, int res, Rng& rng) {
  const double cell = res / 8.0 * rng.uniform(0.72, 0.92);
  const double cy = res / 2.0 + rng.uniform(-0.06, 0.06) * res;
  const double cx = res / 2.0 + rng.uniform(-0.06, 0.06) * res;
  std::vector<double> mask = digit_mask(d, res, cell, cy, cx);
  // Thick strokes: soften, then a steep threshold.
  Image soft(res, res, 1);
  for (std::size_t i = 0; i < mask.size(); ++i) soft.data()[i] = mask[i];
  soft = corruptions::gaussian_blur(soft, 0.04 * res);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double t = std::clamp((soft.data()[i] - 0.18) / 0.2, 0.0, 1.0);
    mask[i] = t * t * (3.0 - 2.0 * t);
  }

  const auto fg = hsv_to_rgb(rng.uniform(), rng.uniform(0.4, 0.9), rng.uniform(0.6, 1.0));
  const auto bg = hsv_to_rgb(rng.uniform(), rng.uniform(0.2, 0.7), rng.uniform(0.15, 0.55));

  // Brush texture: white noise smeared along one stroke direction.
  const double angle = rng.uniform(0.0, 3.14159265358979);
  const double dy = std::sin(angle);
  const double dx = std::cos(angle);
  std::vector<double> noise(mask.size());
  for (double& v : noise) v = rng.uniform();
  const int reach = std::max(2, res / 8);
  std::vector<double> brush(mask.size(), 0.0);
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      double total = 0.0;
      for (int k = -reach; k <= reach; ++k) {
        const int yy = ((y + static_cast<int>(std::lround(k * dy))) % res + res) % res;
        const int xx = ((x + static_cast<int>(std::lround(k * dx))) % res + res) % res;
        total += noise[static_cast<std::size_t>(yy) * res + xx];
      }
      brush[static_cast<std::size_t>(y) * res + x] = total / (2 * reach + 1) - 0.5;
    }
  }
  const double brush_amp = rng.uniform(0.6, 1.2);
  const int levels = 5;

  Image img(res, res, 3);
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * res + x;
      const double m = mask[i];
      for (int c = 0; c < 3; ++c) {
        double value = (bg[c] * (1.0 - m) + fg[c] * m) * (1.0 + brush_amp * brush[i]);
        value = std::round(std::clamp(value, 0.0, 1.0) * (levels - 1)) / (levels - 1);
        img.at(y, x, c) = value;
      }
    }
  }
  return img;
}

}  // namespace

std::vector<DigitRecord> load_digits(const std::string& path) {
  const std::string text = read_maybe_gzip(path);
  std::vector<DigitRecord> out;
  std::istringstream lines(text);
  std::string line;
  int row = 0;
  while (std::getline(lines, line)) {
    if (line.empty() || line == "\r") continue;
    DigitRecord d;
    d.row = row;
    std::istringstream fields(line);
    std::string field;
    int count = 0;
    while (std::getline(fields, field, ',')) {
      int value = 0;
      try {
        value = std::stoi(field);
      } catch (const std::exception&) {
        throw Error("data.malformed", path + ": row " + std::to_string(row) + ": bad number");
      }
      if (count < 64) {
        if (value < 0 || value > 16) {
          throw Error("data.malformed", path + ": row " + std::to_string(row) +
                                            ": intensity outside [0, 16]");
        }
        d.cells[count] = value;
      } else if (count == 64) {
        if (value < 0 || value > 9) {
          throw Error("data.malformed", path + ": row " + std::to_string(row) + ": bad label");
        }
        d.label = value;
      }
      ++count;
    }
    if (count != 65) {
      throw Error("data.malformed",
                  path + ": row " + std::to_string(row) + ": expected 65 fields");
    }
    out.push_back(d);
    ++row;
  }
  if (out.empty()) throw Error("data.malformed", path + " holds no digits");
  return out;
}

Image render_digit(const DigitRecord& digit, RenderStyle style, int resolution, Rng& rng) {
  if (resolution < 8) throw Error("data.resolution", "desk images need resolution >= 8");
  switch (style) {
    case RenderStyle::photo: return render_photo(digit, false, resolution, rng);
    case RenderStyle::photo_ood: return render_photo(digit, true, resolution, rng);
    case RenderStyle::painting: return render_painting(digit, resolution, rng);
  }
  throw Error("data.style", "unknown render style");
}

DeskData make_desk_data(const std::vector<DigitRecord>& digits, const DeskDataOptions& options) {
  const std::size_t needed = options.photos + options.paintings + options.test + options.ood;
  if (needed > digits.size()) {
    throw Error("data.size", "requested " + std::to_string(needed) + " images but only " +
                                 std::to_string(digits.size()) + " digits are available");
  }
  Rng split_rng(derive_seed(options.seed, "desk.split"));
  const auto order = split_rng.permutation(digits.size());

  DeskData out{DomainDataset(10, Domain::photo, options.resolution),
               DomainDataset(10, Domain::painting, options.resolution),
               DomainDataset(10, Domain::photo, options.resolution),
               DomainDataset(10, Domain::photo, options.resolution)};
  std::size_t next = 0;
  auto fill = [&](DomainDataset& target, std::size_t count, RenderStyle style, const char* prefix,
                  Domain domain) {
    for (std::size_t k = 0; k < count; ++k, ++next) {
      const DigitRecord& d = digits[order[next]];
      Rng rng(derive_seed(options.seed, std::string("desk.render.") + prefix,
                          static_cast<std::uint64_t>(d.row)));
      ImageSample s;
      char id[32];
      std::snprintf(id, sizeof id, "%s_%04d", prefix, d.row);
      s.id = id;
      s.pixels = render_digit(d, style, options.resolution, rng);
      s.label = d.label;
      s.domain = domain;
      s.provenance = "digits:row=" + std::to_string(d.row) + ";render=" + prefix;
      target.add(std::move(s));
    }
  };
  fill(out.photos, options.photos, RenderStyle::photo, "photo", Domain::photo);
  fill(out.paintings, options.paintings, RenderStyle::painting, "painting", Domain::painting);
  fill(out.test, options.test, RenderStyle::photo, "test", Domain::photo);
  fill(out.ood, options.ood, RenderStyle::photo_ood, "ood", Domain::photo);
  return out;
}

std::string default_digits_path() { return std::string(STYLESHIFT_DATA_DIR) + "/digits.csv.gz"; }

}  // namespace styleshift::experiment
