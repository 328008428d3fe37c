#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "styleshift/datamodel.hpp"
#include "styleshift/error.hpp"
#include "support.hpp"

namespace styleshift {
namespace {

using testing::random_dataset;
using testing::TempDir;

TEST(ContextSquare, HandArithmeticExample) {
  const SquareCrop crop = context_square({10, 20, 40, 60});
  EXPECT_EQ(crop.side, 60);
  EXPECT_EQ(crop.x0, 0);  // center x 30 - 30
  EXPECT_EQ(crop.y0, 20);  // center y 50 - 30
}

TEST(ContextSquare, SideIsCeilOfOneAndAHalfMinSide) {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const int w = static_cast<int>(rng.uniform_int(1, 300));
    const int h = static_cast<int>(rng.uniform_int(1, 300));
    const BoundingBox box{static_cast<int>(rng.uniform_int(0, 500)),
                          static_cast<int>(rng.uniform_int(0, 500)), w, h};
    const SquareCrop crop = context_square(box);
    // Integer form of ceil(1.5 * m) avoids relying on floating point here.
    const int m = std::min(w, h);
    ASSERT_EQ(crop.side, (3 * m + 1) / 2) << "w=" << w << " h=" << h;
  }
}

TEST(ExtractPatches, PadsOutsideRegionsWithPadValue) {
  Image source(100, 100, 3, 0.5);
  const ImageStore store = [&](const std::string& id) -> const Image* {
    return id == "img" ? &source : nullptr;
  };
  PatchOptions options;
  options.resolution = 60;
  options.pad_value = std::array<double, 3>{0.0, 1.0, 0.25};
  // Box near the left edge: the square extends past x = 0.
  const auto result = extract_patches({{"img", {0, 40, 20, 20}, 1}}, store, options);
  ASSERT_EQ(result.samples.size(), 1u);
  ASSERT_TRUE(result.rejected.empty());
  const Image& patch = result.samples[0].pixels;
  EXPECT_EQ(patch.height(), 60);
  // Side 30 upscaled by 2: the leftmost columns come from padding.
  EXPECT_NEAR(patch.at(30, 0, 0), 0.0, 1e-12);
  EXPECT_NEAR(patch.at(30, 0, 1), 1.0, 1e-12);
  EXPECT_NEAR(patch.at(30, 0, 2), 0.25, 1e-12);
  EXPECT_NEAR(patch.at(30, 59, 0), 0.5, 1e-12);
  EXPECT_EQ(result.samples[0].label, 1);
}

TEST(ExtractPatches, FullImageBoxUsesWholeImage) {
  Rng rng(3);
  const Image source = testing::random_image(rng, 16, 16);
  const ImageStore store = [&](const std::string&) -> const Image* { return &source; };
  PatchOptions options;
  options.resolution = 24;
  const auto result = extract_patches({{"a", {0, 0, 16, 16}, 0}}, store, options);
  ASSERT_EQ(result.samples.size(), 1u);
  // Side 24 around the center: 4 pixels of padding on every side, so the
  // middle matches the source exactly at this scale.
  EXPECT_DOUBLE_EQ(result.samples[0].pixels.at(4, 4, 0), source.at(0, 0, 0));
  EXPECT_DOUBLE_EQ(result.samples[0].pixels.at(19, 19, 2), source.at(15, 15, 2));
}

TEST(ExtractPatches, RejectsBadBoxesAndSmallPaintings) {
  Image source(400, 400, 3, 0.2);
  const ImageStore store = [&](const std::string&) -> const Image* { return &source; };
  PatchOptions options;
  options.resolution = 32;
  options.paintings = true;
  const auto result = extract_patches({{"a", {350, 350, 100, 100}, 0},
                                       {"a", {10, 10, 0, 5}, 0},
                                       {"a", {10, 10, 100, 100}, 0},
                                       {"a", {10, 10, 128, 128}, 0}},
                                      store, options);
  EXPECT_EQ(result.samples.size(), 1u);
  EXPECT_EQ(result.rejected.size(), 3u);
}

TEST(BalanceClasses, ExhaustedClassRedistributes) {
  EXPECT_EQ(balanced_quotas({5, 100}, 20), (std::vector<std::size_t>{5, 15}));
  EXPECT_EQ(balanced_quotas(std::vector<std::size_t>(10, 1000), 10000),
            std::vector<std::size_t>(10, 1000));
}

TEST(BalanceClasses, DeficitIsAnError) {
  const DomainDataset d = random_dataset(10, 2, 4, 1);
  try {
    balance_classes(d, 11, 0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "balance.deficit");
  }
}

TEST(BalanceClasses, PropertyMaxMinusMinAtMostOne) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t classes = rng.uniform_int(1, 8);
    std::vector<std::size_t> supply(classes);
    for (auto& s : supply) s = rng.uniform_int(0, 40);
    const std::size_t total = std::accumulate(supply.begin(), supply.end(), std::size_t{0});
    if (total == 0) continue;
    const std::size_t target = rng.uniform_int(1, static_cast<std::int64_t>(total));
    const auto quotas = balanced_quotas(supply, target);
    ASSERT_EQ(std::accumulate(quotas.begin(), quotas.end(), std::size_t{0}), target);
    std::size_t lo = SIZE_MAX, hi = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      ASSERT_LE(quotas[c], supply[c]);
      if (quotas[c] < supply[c]) lo = std::min(lo, quotas[c]);
      hi = std::max(hi, quotas[c]);
    }
    if (lo != SIZE_MAX) ASSERT_LE(hi - lo, 1u);
  }
}

TEST(BalanceClasses, DeterministicAndWholeWhenTargetIsSupply) {
  const DomainDataset d = random_dataset(30, 3, 4, 2);
  const auto a = balance_classes(d, 12, 5);
  const auto b = balance_classes(d, 12, 5);
  ASSERT_EQ(a.size(), 12u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id, b[i].id);
  EXPECT_EQ(a.class_counts(), (std::vector<std::size_t>{4, 4, 4}));
  EXPECT_EQ(balance_classes(d, 30, 5).size(), 30u);
}

TEST(BudgetSplit, RoundsHalfToEven) {
  EXPECT_EQ(BudgetSplit::make(1500, 0.5).painting_count, 750u);
  EXPECT_EQ(BudgetSplit::make(30000, 0.5).photo_count, 15000u);
  EXPECT_EQ(BudgetSplit::make(10, 0.25).painting_count, 2u);  // 2.5 -> 2
  EXPECT_EQ(BudgetSplit::make(14, 0.25).painting_count, 4u);  // 3.5 -> 4
  const BudgetSplit none = BudgetSplit::make(7, 0.0);
  EXPECT_EQ(none.photo_count, 7u);
  EXPECT_EQ(none.painting_count, 0u);
}

TEST(BudgetSplit, ConservesBudget) {
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const auto budget = static_cast<std::size_t>(rng.uniform_int(1, 100000));
    const BudgetSplit s = BudgetSplit::make(budget, rng.uniform());
    ASSERT_EQ(s.photo_count + s.painting_count, budget);
  }
}

TEST(BudgetSplit, SubsamplesBothDomains) {
  const DomainDataset photos = random_dataset(40, 4, 4, 1, Domain::photo, "p");
  const DomainDataset paintings = random_dataset(40, 4, 4, 2, Domain::painting, "q");
  const auto [n, p] = make_budget_split(photos, paintings, BudgetSplit::make(20, 0.5), 3);
  EXPECT_EQ(n.size(), 10u);
  EXPECT_EQ(p.size(), 10u);
  EXPECT_THROW(make_budget_split(photos, paintings, BudgetSplit::make(100, 0.5), 3), Error);
}

TEST(Manifest, RoundTripPreservesFields) {
  TempDir dir("manifest");
  DomainDataset d = random_dataset(6, 3, 8, 9);
  for (auto& s : d.mutable_samples()) {
    s.provenance = "src:" + s.id;
    s.pixels.quantize8();
  }
  save_manifest(d, dir.file("m.tsv"));
  const DomainDataset back = load_manifest(dir.file("m.tsv"));
  ASSERT_EQ(back.size(), d.size());
  EXPECT_EQ(back.num_classes(), 3);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(back[i].id, d[i].id);
    EXPECT_EQ(back[i].label, d[i].label);
    EXPECT_EQ(back[i].domain, d[i].domain);
    EXPECT_EQ(back[i].provenance, d[i].provenance);
    EXPECT_EQ(back[i].image_path, d[i].image_path);
    EXPECT_EQ(back[i].pixels, d[i].pixels);
  }
  EXPECT_EQ(back.content_hash(), d.content_hash());
}

TEST(Manifest, LabelOutOfRangeNamesTheLine) {
  TempDir dir("manifest_bad");
  DomainDataset d = random_dataset(2, 2, 4, 1);
  save_manifest(d, dir.file("m.tsv"));
  std::ifstream in(dir.file("m.tsv"));
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  in.close();
  // Second record gets label 2 == num_classes.
  const auto parts = second.find('\t', second.find('\t') + 1);
  second = second.substr(0, parts + 1) + "2" + second.substr(second.find('\t', parts + 1));
  std::ofstream(dir.file("m.tsv")) << header << '\n' << first << '\n' << second << '\n';
  try {
    load_manifest(dir.file("m.tsv"));
    FAIL() << "expected a load error";
  } catch (const RecordError& e) {
    ASSERT_EQ(e.diagnostics().size(), 1u);
    EXPECT_NE(e.diagnostics()[0].find(":3:"), std::string::npos) << e.diagnostics()[0];
  }
}

TEST(Manifest, EmptyManifestKeepsClassCount) {
  TempDir dir("manifest_empty");
  DomainDataset d(7, Domain::painting, 16);
  save_manifest(d, dir.file("m.tsv"));
  const DomainDataset back = load_manifest(dir.file("m.tsv"));
  EXPECT_TRUE(back.empty());
  EXPECT_EQ(back.num_classes(), 7);
  EXPECT_EQ(back.domain(), Domain::painting);
}

TEST(Manifest, MissingImageFails) {
  TempDir dir("manifest_missing");
  std::ofstream(dir.file("m.tsv")) << "#styleshift-manifest v1\tnum_classes=2\tresolution=4"
                                      "\tdomain=photo\na\tnope.png\t0\tphoto\t\n";
  EXPECT_THROW(load_manifest(dir.file("m.tsv")), RecordError);
}

TEST(DomainDataset, RejectsInvariantViolations) {
  DomainDataset d(2, Domain::photo, 4);
  ImageSample s;
  s.id = "x";
  s.pixels = Image(4, 4, 3, 0.5);
  s.label = 2;
  EXPECT_THROW(d.add(s), Error);
  s.label = 1;
  s.domain = Domain::painting;
  EXPECT_THROW(d.add(s), Error);
  s.domain = Domain::photo;
  s.pixels = Image(5, 5, 3, 0.5);
  EXPECT_THROW(d.add(s), Error);
  s.pixels = Image(4, 4, 3, 0.5);
  d.add(s);
  EXPECT_EQ(d.class_index().at(1), std::vector<std::string>{"x"});
}

}  // namespace
}  // namespace styleshift
