#include "styleshift/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "styleshift/error.hpp"
#include "styleshift/random.hpp"

namespace fs = std::filesystem;

namespace styleshift {

std::string_view to_string(Domain domain) {
  switch (domain) {
    case Domain::photo: return "photo";
    case Domain::painting: return "painting";
    case Domain::stylized: return "stylized";
    case Domain::filtered: return "filtered";
  }
  return "photo";
}

Domain parse_domain(std::string_view text) {
  if (text == "photo") return Domain::photo;
  if (text == "painting") return Domain::painting;
  if (text == "stylized") return Domain::stylized;
  if (text == "filtered") return Domain::filtered;
  throw Error("domain.unknown", "unknown domain '" + std::string(text) + "'");
}

DomainDataset::DomainDataset(int num_classes, Domain domain, int resolution)
    : num_classes_(num_classes), domain_(domain), resolution_(resolution) {
  if (num_classes <= 0) throw Error("dataset.classes", "num_classes must be positive");
  if (resolution <= 0) throw Error("dataset.resolution", "resolution must be positive");
}

void DomainDataset::add(ImageSample sample) {
  if (sample.label < 0 || sample.label >= num_classes_) {
    throw Error("dataset.label", "sample '" + sample.id + "' has label " +
                                     std::to_string(sample.label) + " outside [0, " +
                                     std::to_string(num_classes_) + ")");
  }
  if (sample.domain != domain_) {
    throw Error("dataset.domain", "sample '" + sample.id + "' has domain " +
                                      std::string(to_string(sample.domain)) +
                                      ", dataset is " + std::string(to_string(domain_)));
  }
  if (sample.pixels.height() != resolution_ || sample.pixels.width() != resolution_) {
    throw Error("dataset.resolution",
                "sample '" + sample.id + "' is " + std::to_string(sample.pixels.height()) +
                    "x" + std::to_string(sample.pixels.width()) + ", expected " +
                    std::to_string(resolution_));
  }
  samples_.push_back(std::move(sample));
}

std::map<int, std::vector<std::string>> DomainDataset::class_index() const {
  std::map<int, std::vector<std::string>> index;
  for (const auto& s : samples_) index[s.label].push_back(s.id);
  return index;
}

std::vector<std::size_t> DomainDataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes_, 0);
  for (const auto& s : samples_) ++counts[s.label];
  return counts;
}

std::optional<std::size_t> DomainDataset::find(std::string_view id) const {
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i].id == id) return i;
  }
  return std::nullopt;
}

void DomainDataset::validate() const {
  std::set<std::string> ids;
  for (const auto& s : samples_) {
    if (!ids.insert(s.id).second) throw Error("dataset.duplicate", "duplicate id '" + s.id + "'");
    if (s.domain != domain_) throw Error("dataset.domain", "domain mismatch for '" + s.id + "'");
    if (s.label < 0 || s.label >= num_classes_) {
      throw Error("dataset.label", "label out of range for '" + s.id + "'");
    }
    if (s.pixels.height() != resolution_ || s.pixels.width() != resolution_ ||
        s.pixels.channels() != 3) {
      throw Error("dataset.resolution", "bad shape for '" + s.id + "'");
    }
    for (double v : s.pixels.data()) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error("dataset.range", "pixel outside [0,1] in '" + s.id + "'");
      }
    }
  }
}

std::uint64_t DomainDataset::content_hash() const {
  Fnv1a h;
  h.add(static_cast<std::uint64_t>(num_classes_))
      .add(to_string(domain_))
      .add(static_cast<std::uint64_t>(resolution_));
  for (const auto& s : samples_) {
    h.add(s.id).add(static_cast<std::uint64_t>(s.label)).add(to_string(s.domain));
    const auto bytes = s.pixels.to_bytes();
    h.add(std::span<const std::uint8_t>(bytes));
  }
  return h.value();
}

std::vector<ImageSample> merge_samples(const std::vector<const DomainDataset*>& parts) {
  std::vector<ImageSample> merged;
  if (parts.empty()) return merged;
  const auto* first = parts.front();
  for (const auto* part : parts) {
    if (part->num_classes() != first->num_classes()) {
      throw Error("dataset.vocabulary", "cannot merge datasets with different class counts");
    }
    if (part->resolution() != first->resolution()) {
      throw Error("dataset.resolution", "cannot merge datasets with different resolutions");
    }
    merged.insert(merged.end(), part->samples().begin(), part->samples().end());
  }
  return merged;
}

// -- Patch extraction ------------------------------------------------------

SquareCrop context_square(const BoundingBox& box) {
  const int side = static_cast<int>(std::ceil(1.5 * std::min(box.width, box.height)));
  auto floor_div2 = [](int v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); };
  return {box.x0 + floor_div2(box.width - side), box.y0 + floor_div2(box.height - side), side};
}

Image crop_with_padding(const Image& source, const SquareCrop& crop,
                        const std::array<double, 3>& pad) {
  Image out(crop.side, crop.side, 3);
  for (int y = 0; y < crop.side; ++y) {
    const int sy = crop.y0 + y;
    for (int x = 0; x < crop.side; ++x) {
      const int sx = crop.x0 + x;
      const bool inside = sy >= 0 && sy < source.height() && sx >= 0 && sx < source.width();
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = inside ? source.at(sy, sx, c) : pad[c];
    }
  }
  return out;
}

PatchResult extract_patches(const std::vector<Segment>& segments, const ImageStore& images,
                            const PatchOptions& options) {
  PatchResult result;

  std::array<double, 3> pad{0.0, 0.0, 0.0};
  if (options.pad_value) {
    pad = *options.pad_value;
  } else {
    // Channel mean over every distinct source image referenced.
    std::set<std::string> seen;
    std::array<double, 3> sum{0.0, 0.0, 0.0};
    double count = 0.0;
    for (const auto& seg : segments) {
      if (!seen.insert(seg.image_id).second) continue;
      const Image* img = images(seg.image_id);
      if (img == nullptr) continue;
      for (int y = 0; y < img->height(); ++y) {
        for (int x = 0; x < img->width(); ++x) {
          for (int c = 0; c < 3; ++c) sum[c] += img->at(y, x, c);
        }
      }
      count += static_cast<double>(img->height()) * img->width();
    }
    if (count > 0.0) {
      for (int c = 0; c < 3; ++c) pad[c] = sum[c] / count;
    }
  }

  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& seg = segments[i];
    const std::string where = "segment " + std::to_string(i) + " (" + seg.image_id + ")";
    const Image* img = images(seg.image_id);
    if (img == nullptr) {
      result.rejected.push_back(where + ": image not found");
      continue;
    }
    const BoundingBox& b = seg.tight_box;
    if (b.width <= 0 || b.height <= 0) {
      result.rejected.push_back(where + ": zero-area bounding box");
      continue;
    }
    if (b.x0 < 0 || b.y0 < 0 || b.x0 + b.width > img->width() ||
        b.y0 + b.height > img->height()) {
      result.rejected.push_back(where + ": bounding box outside image");
      continue;
    }
    if (options.paintings &&
        static_cast<long long>(b.width) * b.height < options.min_painting_area) {
      result.rejected.push_back(where + ": painting segment below minimum area");
      continue;
    }
    const SquareCrop crop = context_square(b);
    Image patch = crop_with_padding(*img, crop, pad);
    patch = resize_bilinear(patch, options.resolution, options.resolution);
    patch.clamp();

    ImageSample sample;
    sample.id = seg.image_id + "_" + std::to_string(i);
    sample.pixels = std::move(patch);
    sample.label = seg.label;
    sample.domain = options.domain;
    sample.provenance = seg.image_id;
    result.samples.push_back(std::move(sample));
  }
  return result;
}

// -- Sampling --------------------------------------------------------------

std::vector<std::size_t> balanced_quotas(const std::vector<std::size_t>& supply,
                                         std::size_t target_total) {
  const std::size_t available = std::accumulate(supply.begin(), supply.end(), std::size_t{0});
  if (target_total > available) {
    throw Error("balance.deficit", "requested " + std::to_string(target_total) +
                                       " samples but only " + std::to_string(available) +
                                       " are available (deficit " +
                                       std::to_string(target_total - available) + ")");
  }
  std::vector<std::size_t> quota(supply.size(), 0);
  std::vector<std::size_t> active;
  for (std::size_t c = 0; c < supply.size(); ++c) {
    if (supply[c] > 0) active.push_back(c);
  }
  std::size_t remaining = target_total;
  while (!active.empty()) {
    const std::size_t level = remaining / active.size();
    std::vector<std::size_t> still_active;
    for (std::size_t c : active) {
      if (supply[c] <= level) {
        quota[c] = supply[c];
        remaining -= supply[c];
      } else {
        still_active.push_back(c);
      }
    }
    if (still_active.size() == active.size()) {
      for (std::size_t c : active) quota[c] = level;
      remaining -= level * active.size();
      std::stable_sort(active.begin(), active.end(), [&](std::size_t a, std::size_t b) {
        return supply[a] - quota[a] > supply[b] - quota[b];
      });
      for (std::size_t k = 0; k < remaining; ++k) ++quota[active[k]];
      break;
    }
    active = std::move(still_active);
  }
  return quota;
}

DomainDataset balance_classes(const DomainDataset& dataset, std::size_t target_total,
                              std::uint64_t seed) {
  const auto quotas = balanced_quotas(dataset.class_counts(), target_total);
  std::vector<std::vector<std::size_t>> members(dataset.num_classes());
  for (std::size_t i = 0; i < dataset.size(); ++i) members[dataset[i].label].push_back(i);

  std::vector<bool> keep(dataset.size(), false);
  for (int c = 0; c < dataset.num_classes(); ++c) {
    Rng rng(derive_seed(seed, "balance_classes", static_cast<std::uint64_t>(c)));
    auto& m = members[c];
    rng.shuffle(m);
    for (std::size_t k = 0; k < quotas[c]; ++k) keep[m[k]] = true;
  }
  DomainDataset out(dataset.num_classes(), dataset.domain(), dataset.resolution());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (keep[i]) out.add(dataset[i]);
  }
  return out;
}

BudgetSplit BudgetSplit::make(std::size_t budget, double painting_fraction) {
  if (budget == 0) throw Error("budget.invalid", "budget must be positive");
  if (!(painting_fraction >= 0.0 && painting_fraction <= 1.0)) {
    throw Error("budget.invalid", "painting fraction must lie in [0, 1]");
  }
  BudgetSplit split;
  split.budget = budget;
  split.painting_fraction = painting_fraction;
  // nearbyint under the default rounding mode rounds half to even.
  split.painting_count = static_cast<std::size_t>(
      std::nearbyint(painting_fraction * static_cast<double>(budget)));
  split.photo_count = budget - split.painting_count;
  return split;
}

std::pair<DomainDataset, DomainDataset> make_budget_split(const DomainDataset& photos,
                                                          const DomainDataset& paintings,
                                                          const BudgetSplit& split,
                                                          std::uint64_t seed) {
  if (split.photo_count > photos.size()) {
    throw Error("budget.supply", "budget needs " + std::to_string(split.photo_count) +
                                     " photos, only " + std::to_string(photos.size()) +
                                     " available");
  }
  if (split.painting_count > paintings.size()) {
    throw Error("budget.supply", "budget needs " + std::to_string(split.painting_count) +
                                     " paintings, only " + std::to_string(paintings.size()) +
                                     " available");
  }
  return {balance_classes(photos, split.photo_count, derive_seed(seed, "budget.photos")),
          balance_classes(paintings, split.painting_count,
                          derive_seed(seed, "budget.paintings"))};
}

// -- Manifests -------------------------------------------------------------

namespace {

constexpr std::string_view kManifestMagic = "#styleshift-manifest v1";

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

bool parse_int(const std::string& text, int& out) {
  if (text.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stoi(text, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == text.size();
}

}  // namespace

DomainDataset load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("manifest.open", "cannot open manifest '" + path + "'");
  const fs::path base = fs::path(path).parent_path();

  std::string header;
  if (!std::getline(in, header)) {
    throw Error("manifest.header", path + ":1: missing header line");
  }
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const auto header_fields = split_tabs(header);
  if (header_fields.empty() || header_fields[0] != kManifestMagic) {
    throw Error("manifest.header", path + ":1: not a styleshift manifest");
  }
  int num_classes = -1;
  int resolution = -1;
  Domain domain = Domain::photo;
  for (std::size_t i = 1; i < header_fields.size(); ++i) {
    const auto& f = header_fields[i];
    const auto eq = f.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = f.substr(0, eq);
    const std::string value = f.substr(eq + 1);
    if (key == "num_classes" && !parse_int(value, num_classes)) num_classes = -1;
    if (key == "resolution" && !parse_int(value, resolution)) resolution = -1;
    if (key == "domain") domain = parse_domain(value);
  }
  if (num_classes <= 0 || resolution <= 0) {
    throw Error("manifest.header",
                path + ":1: header must declare positive num_classes and resolution");
  }

  DomainDataset dataset(num_classes, domain, resolution);
  std::vector<std::string> diagnostics;
  std::set<std::string> ids;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no) + ": ";
    const auto fields = split_tabs(line);
    if (fields.size() != 5) {
      diagnostics.push_back(where + "expected 5 tab-separated fields, got " +
                            std::to_string(fields.size()));
      continue;
    }
    ImageSample sample;
    sample.id = fields[0];
    sample.image_path = fields[1];
    sample.provenance = fields[4];
    if (sample.id.empty()) {
      diagnostics.push_back(where + "empty id");
      continue;
    }
    if (!ids.insert(sample.id).second) {
      diagnostics.push_back(where + "duplicate id '" + sample.id + "'");
      continue;
    }
    if (!parse_int(fields[2], sample.label)) {
      diagnostics.push_back(where + "label '" + fields[2] + "' is not an integer");
      continue;
    }
    if (sample.label < 0 || sample.label >= num_classes) {
      diagnostics.push_back(where + "label " + fields[2] + " outside [0, " +
                            std::to_string(num_classes) + ")");
      continue;
    }
    try {
      sample.domain = parse_domain(fields[3]);
    } catch (const Error& e) {
      diagnostics.push_back(where + e.what());
      continue;
    }
    if (sample.domain != domain) {
      diagnostics.push_back(where + "record domain '" + fields[3] +
                            "' differs from header domain");
      continue;
    }
    fs::path image_path = sample.image_path;
    if (image_path.is_relative()) image_path = base / image_path;
    if (!fs::exists(image_path)) {
      diagnostics.push_back(where + "missing image file '" + image_path.string() + "'");
      continue;
    }
    try {
      sample.pixels = read_png(image_path.string());
    } catch (const Error& e) {
      diagnostics.push_back(where + e.what());
      continue;
    }
    if (sample.pixels.height() != resolution || sample.pixels.width() != resolution) {
      diagnostics.push_back(where + "image is " + std::to_string(sample.pixels.height()) + "x" +
                            std::to_string(sample.pixels.width()) + ", expected " +
                            std::to_string(resolution));
      continue;
    }
    dataset.add(std::move(sample));
  }
  if (!diagnostics.empty()) throw RecordError("manifest.malformed", std::move(diagnostics));
  return dataset;
}

void save_manifest(DomainDataset& dataset, const std::string& path) {
  const fs::path manifest_path(path);
  const fs::path base = manifest_path.parent_path();
  if (!base.empty()) fs::create_directories(base);

  auto check_field = [](const std::string& value, const std::string& what) {
    if (value.find_first_of("\t\n\r") != std::string::npos) {
      throw Error("manifest.field", what + " contains a tab or newline: '" + value + "'");
    }
  };

  std::ostringstream out;
  out << kManifestMagic << "\tnum_classes=" << dataset.num_classes()
      << "\tresolution=" << dataset.resolution() << "\tdomain=" << to_string(dataset.domain())
      << '\n';
  for (auto& s : dataset.mutable_samples()) {
    check_field(s.id, "id");
    check_field(s.provenance, "provenance");
    if (s.image_path.empty()) {
      fs::create_directories(base / "images");
      s.image_path = (fs::path("images") / (s.id + ".png")).string();
      write_png(s.pixels, (base / s.image_path).string());
    }
    check_field(s.image_path, "image path");
    out << s.id << '\t' << s.image_path << '\t' << s.label << '\t' << to_string(s.domain)
        << '\t' << s.provenance << '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error("manifest.write", "cannot write manifest '" + path + "'");
  file << out.str();
}

}  // namespace styleshift
