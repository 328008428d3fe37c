#include <gtest/gtest.h>

#include <fstream>

#include "styleshift/error.hpp"
#include "styleshift/experiment.hpp"
#include "support.hpp"

namespace styleshift::experiment {
namespace {

using nlohmann::json;
using testing::TempDir;

std::string error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

// Writes small photo, painting and test manifests and returns a config
// document pointing at them.
json write_toy_data(const TempDir& dir) {
  DomainDataset photos = testing::separable_toy(24, 8, 1, Domain::photo, "p");
  DomainDataset paintings = testing::separable_toy(12, 8, 2, Domain::painting, "a");
  DomainDataset test = testing::separable_toy(10, 8, 3, Domain::photo, "t");
  DomainDataset ood = testing::separable_toy(6, 8, 4, Domain::photo, "o");
  save_manifest(photos, dir.file("photos.tsv"));
  save_manifest(paintings, dir.file("paintings.tsv"));
  save_manifest(test, dir.file("test.tsv"));
  save_manifest(ood, dir.file("ood.tsv"));
  training::TrainingConfig t;
  t.epochs = 2;
  t.lr_drop_epoch = 3;
  t.base_lr = 0.01;
  t.dropped_lr = 0.001;
  t.batch_size = 8;
  t.finetune_epochs = 1;
  t.adversary_warmup_epochs = 0;
  t.discriminator_hidden = 4;
  t.backbone = training::BackboneSpec::preset("resnet_micro");
  return {{"data",
           {{"photos", "photos.tsv"},
            {"paintings", "paintings.tsv"},
            {"test", "test.tsv"},
            {"ood", "ood.tsv"}}},
          {"output_dir", "out"},
          {"training", training::to_json(t)},
          {"seeds", {0, 1}}};
}

TEST(ExperimentConfig, ResolvesPathsAgainstConfigDirectory) {
  TempDir dir("cfg_paths");
  const json doc = write_toy_data(dir);
  std::ofstream(dir.file("exp.json")) << doc.dump(2);
  const ExperimentConfig c = load_experiment_config(dir.file("exp.json"));
  EXPECT_EQ(c.resolve(c.data.photos), dir.file("photos.tsv"));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{0, 1}));
  EXPECT_EQ(c.training.epochs, 2);
  const ExperimentConfig again = experiment_config_from_json(to_json(c), dir.path());
  EXPECT_EQ(to_json(again), to_json(c));
}

TEST(ExperimentConfig, RejectsBadDocuments) {
  TempDir dir("cfg_bad");
  const json base = write_toy_data(dir);
  auto parse = [&](json doc) { return [&dir, doc] { experiment_config_from_json(doc, dir.path()); }; };

  json unknown = base;
  unknown["learning_rate"] = 0.1;
  EXPECT_EQ(error_code(parse(unknown)), "config.unknown_key");

  json missing = base;
  missing["data"]["photos"] = "nowhere.tsv";
  EXPECT_EQ(error_code(parse(missing)), "config.missing_manifest");

  json no_test = base;
  no_test["data"].erase("test");
  EXPECT_NE(error_code(parse(no_test)), "");

  json no_seeds = base;
  no_seeds["seeds"] = json::array();
  EXPECT_NE(error_code(parse(no_seeds)), "");

  json bad_axis = base;
  bad_axis["sweep"] = {{"axis", "learning_rate"}, {"values", {1, 2}}};
  EXPECT_EQ(error_code(parse(bad_axis)), "config.sweep");

  EXPECT_NO_THROW(parse(base)());
}

TEST(ExperimentConfig, ShippedExampleLoads) {
  TempDir dir("cfg_example");
  write_toy_data(dir);
  ::setenv("STYLESHIFT_DATA_ROOT", dir.path().c_str(), 1);
  const std::string path = std::string(STYLESHIFT_SOURCE_DIR) + "/configs/desk_style_policy.json";
  const ExperimentConfig c = load_experiment_config(path);
  EXPECT_EQ(c.resolve(c.data.ood), dir.file("ood.tsv"));
  ::unsetenv("STYLESHIFT_DATA_ROOT");
  ASSERT_TRUE(c.sweep.has_value());
  EXPECT_EQ(c.sweep->values.size(), 4u);
  for (const auto& v : c.sweep->values) EXPECT_NO_THROW(cell_for_axis(c, c.sweep->axis, v));
  EXPECT_EQ(c.training.lr_for_epoch(24), 0.005);
  EXPECT_EQ(error_code([&] { load_experiment_config(path); }), "config.env");
}

TEST(CellForAxis, MapsAxisValuesToRecipes) {
  ExperimentConfig c;
  c.scheme = "stylized";

  const CellSpec none = cell_for_axis(c, "style_policy", "none");
  EXPECT_EQ(none.scheme, "joint");
  EXPECT_EQ(none.sources, "photos");
  const CellSpec intraclass = cell_for_axis(c, "style_policy", "intraclass");
  EXPECT_EQ(intraclass.scheme, "stylized");
  EXPECT_EQ(intraclass.sources, "photos+stylized");
  EXPECT_EQ(intraclass.policy.kind, stylization::PolicyKind::intradomain_intraclass);

  const CellSpec photo_only = cell_for_axis(c, "classifier_scheme", "photo_only");
  EXPECT_EQ(photo_only.sources, "photos");
  const CellSpec multitask = cell_for_axis(c, "classifier_scheme", "multitask");
  EXPECT_EQ(multitask.scheme, "multitask");
  EXPECT_EQ(multitask.sources, "photos+paintings");
  EXPECT_THROW(cell_for_axis(c, "classifier_scheme", "boosting"), Error);

  const CellSpec fraction = cell_for_axis(c, "painting_fraction", "0.25");
  ASSERT_TRUE(fraction.painting_fraction.has_value());
  EXPECT_EQ(*fraction.painting_fraction, 0.25);
  EXPECT_THROW(cell_for_axis(c, "painting_fraction", "1.5"), Error);
  EXPECT_THROW(cell_for_axis(c, "painting_fraction", "half"), Error);

  EXPECT_EQ(cell_for_axis(c, "lf_ablation", "photos+stylized_lf").sources, "photos+stylized_lf");
  EXPECT_THROW(cell_for_axis(c, "depth", "3"), Error);
}

TEST(Sweep, PaintingFractionRunsEveryCellAndReproduces) {
  TempDir dir("sweep");
  json doc = write_toy_data(dir);
  doc["seeds"] = {0, 1, 2};
  const ExperimentConfig c = experiment_config_from_json(doc, dir.path());
  const SweepSpec sweep{"painting_fraction", {"0", "0.25", "0.5"}};

  const SweepResult first = run_sweep(c, sweep);
  ASSERT_EQ(first.rows.size(), 3u);
  std::size_t runs = 0;
  for (const auto& row : first.rows) {
    EXPECT_TRUE(row.failures.empty()) << row.value;
    runs += row.runs;
  }
  EXPECT_EQ(runs, 9u);

  const std::string csv = summary_csv(first);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / "summary.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / "0.25" / "seed_2" / "report.json"));

  const SweepResult second = run_sweep(c, sweep);
  EXPECT_EQ(second.summary_hash, first.summary_hash);
  for (std::size_t r = 0; r < first.rows.size(); ++r) {
    for (const auto& [key, m] : first.rows[r].aggregate->metrics) {
      EXPECT_NEAR(second.rows[r].aggregate->metrics.at(key).mean, m.mean, 1e-6) << key;
    }
  }
}

TEST(Sweep, FailedCellIsRecordedNotFatal) {
  TempDir dir("sweep_fail");
  json doc = write_toy_data(dir);
  doc["seeds"] = {0};
  const ExperimentConfig c = experiment_config_from_json(doc, dir.path());
  const SweepResult result = run_sweep(c, {"combined_sources", {"photos", "photos+sketches"}});
  ASSERT_EQ(result.rows.size(), 2u);
  EXPECT_EQ(result.rows[0].runs, 1u);
  EXPECT_EQ(result.rows[1].runs, 0u);
  ASSERT_EQ(result.rows[1].failures.size(), 1u);
  EXPECT_NE(result.rows[1].failures[0].find("config.sources"), std::string::npos);
  EXPECT_NE(summary_csv(result).find("photos+sketches,0,,"), std::string::npos);
}

}  // namespace
}  // namespace styleshift::experiment
