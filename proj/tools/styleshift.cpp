#include <malloc.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "styleshift/corruptions.hpp"
#include "styleshift/error.hpp"
#include "styleshift/evaluation.hpp"
#include "styleshift/experiment.hpp"
#include "styleshift/frequency.hpp"
#include "styleshift/image.hpp"
#include "styleshift/stylization.hpp"
#include "styleshift/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace styleshift;

namespace {

constexpr const char* kVersion = "0.3.0";
constexpr const char* kCorruptedIndex = "corrupted_sets.tsv";

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io.read", "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("config.parse", path + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("io.write", "cannot write " + path.string());
  out << text;
  if (!out) throw Error("io.write", "failed writing " + path.string());
}

std::string hash_of(const DomainDataset& d) { return hex64(d.content_hash()); }

/// Prints the resolved configuration and records it as the run descriptor.
void describe(const std::string& command, const json& resolved, const json& datasets,
              const fs::path& descriptor) {
  std::cout << json{{"command", command}, {"config", resolved}}.dump(2) << '\n';
  json doc{{"tool", "styleshift"},
           {"version", kVersion},
           {"command", command},
           {"config", resolved},
           {"datasets", datasets},
           {"severity_tables", std::string(corruptions::severity_table_version())}};
  write_text(descriptor, doc.dump(2) + "\n");
}

fs::path descriptor_for_file(const std::string& out) { return fs::path(out + ".run.json"); }

// -- corrupted set directories --------------------------------------------

void save_corrupted(std::vector<corruptions::CorruptedSet>& sets, const fs::path& dir) {
  fs::create_directories(dir);
  std::ostringstream index;
  index << "#styleshift-corrupted v1\n";
  for (auto& set : sets) {
    // DIR/<name>/<severity>/<id>.png with the set's manifest alongside.
    const fs::path sub = fs::path(set.spec.name) / std::to_string(set.spec.severity);
    fs::create_directories(dir / sub);
    for (auto& sample : set.samples.mutable_samples()) {
      sample.image_path = sample.id + ".png";
      write_png(sample.pixels, (dir / sub / sample.image_path).string());
    }
    save_manifest(set.samples, (dir / sub / "manifest.tsv").string());
    index << set.spec.key() << '\t' << (sub / "manifest.tsv").string() << '\n';
  }
  write_text(dir / kCorruptedIndex, index.str());
}

std::vector<corruptions::CorruptedSet> load_corrupted(const fs::path& dir) {
  const fs::path index_path = dir / kCorruptedIndex;
  std::ifstream in(index_path);
  if (!in) throw Error("io.read", "no corrupted-set index at " + index_path.string());
  std::vector<corruptions::CorruptedSet> sets;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error("corrupted.index",
                  index_path.string() + ":" + std::to_string(line_no) + ": expected key<TAB>path");
    }
    corruptions::CorruptedSet set;
    set.spec = corruptions::CorruptionSpec::parse(line.substr(0, tab));
    fs::path manifest = line.substr(tab + 1);
    if (manifest.is_relative()) manifest = dir / manifest;
    set.samples = load_manifest(manifest.string());
    sets.push_back(std::move(set));
  }
  return sets;
}

// -- model loading ---------------------------------------------------------

struct LoadedModel {
  std::unique_ptr<Classifier> classifier;
  const training::TrainedModel* trained = nullptr;
};

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io.read", "cannot open model " + path);
  char magic[4] = {};
  in.read(magic, 4);
  LoadedModel out;
  if (std::string(magic, 4) == "SSCK") {
    auto model = std::make_unique<training::TrainedModel>(training::load_checkpoint(path));
    out.trained = model.get();
    out.classifier = std::move(model);
  } else {
    out.classifier = std::make_unique<evaluation::StoredLogitClassifier>(
        evaluation::StoredLogitClassifier::from_json(read_json(path)));
  }
  return out;
}

// -- subcommands -----------------------------------------------------------

struct PrepareOptions {
  std::string source;
  std::string out;
  int resolution = 32;
  std::uint64_t seed = 0;
  std::size_t photos = 900;
  std::size_t paintings = 300;
  std::size_t test = 300;
  std::size_t ood = 297;
};

int run_prepare(const PrepareOptions& o) {
  const std::string source = o.source.empty() ? experiment::default_digits_path() : o.source;
  experiment::DeskDataOptions opts;
  opts.resolution = o.resolution;
  opts.seed = o.seed;
  opts.photos = o.photos;
  opts.paintings = o.paintings;
  opts.test = o.test;
  opts.ood = o.ood;
  auto data = experiment::make_desk_data(experiment::load_digits(source), opts);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  save_manifest(data.photos, (dir / "photos.tsv").string());
  save_manifest(data.paintings, (dir / "paintings.tsv").string());
  save_manifest(data.test, (dir / "test.tsv").string());
  save_manifest(data.ood, (dir / "ood.tsv").string());
  describe("prepare-data",
           {{"source", source},
            {"out", o.out},
            {"resolution", o.resolution},
            {"seed", o.seed},
            {"counts",
             {{"photos", o.photos}, {"paintings", o.paintings}, {"test", o.test}, {"ood", o.ood}}}},
           {{"photos", hash_of(data.photos)},
            {"paintings", hash_of(data.paintings)},
            {"test", hash_of(data.test)},
            {"ood", hash_of(data.ood)}},
           dir / "run.json");
  return 0;
}

struct CorruptOptions {
  std::string manifest;
  std::string out;
  std::vector<std::string> specs;
  std::uint64_t seed = 0;
};

int run_corrupt(const CorruptOptions& o) {
  const DomainDataset test = load_manifest(o.manifest);
  std::vector<corruptions::CorruptionSpec> specs;
  if (o.specs.empty()) {
    specs = corruptions::all_specs();
  } else {
    for (const auto& s : o.specs) specs.push_back(corruptions::CorruptionSpec::parse(s));
  }
  auto sets = corruptions::corrupt_dataset(test, specs, o.seed);
  save_corrupted(sets, o.out);
  json keys = json::array();
  for (const auto& s : specs) keys.push_back(s.key());
  describe("corrupt", {{"manifest", o.manifest}, {"out", o.out}, {"seed", o.seed}, {"specs", keys}},
           {{"input", hash_of(test)}}, fs::path(o.out) / "run.json");
  return 0;
}

struct StylizeOptions {
  std::string content;
  std::string pool;
  std::string policy = "intradomain";
  bool include_self = false;
  std::string feature_space = "decorrelated_color";
  double strength = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

int run_stylize(const StylizeOptions& o) {
  const DomainDataset content = load_manifest(o.content);
  const DomainDataset pool = o.pool.empty() ? content : load_manifest(o.pool);
  stylization::StylePolicy policy;
  policy.kind = stylization::parse_policy(o.policy);
  policy.exclude_self = !o.include_self;
  stylization::Stylizer stylizer;
  stylizer.feature_space = stylization::parse_feature_space(o.feature_space);
  if (stylizer.feature_space == stylization::FeatureSpace::plugin_features) {
    throw Error("cli.stylizer", "plugin feature spaces are available from the library only");
  }
  stylizer.strength = o.strength;
  auto result = stylization::stylize_dataset(content, pool, policy, stylizer, o.seed);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  save_manifest(result.dataset, (dir / "stylized.tsv").string());
  stylization::save_pairing_table(result.pairs, (dir / "pairing.tsv").string());
  describe("stylize",
           {{"content", o.content},
            {"pool", o.pool.empty() ? o.content : o.pool},
            {"policy", std::string(stylization::to_string(policy.kind))},
            {"exclude_self", policy.exclude_self},
            {"feature_space", std::string(stylization::to_string(stylizer.feature_space))},
            {"strength", stylizer.strength},
            {"seed", o.seed},
            {"out", o.out}},
           {{"content", hash_of(content)},
            {"pool", hash_of(pool)},
            {"stylized", hash_of(result.dataset)}},
           dir / "run.json");
  return 0;
}

struct LowpassOptions {
  std::string manifest;
  double tau = 0.0;
  std::string out;
};

int run_lowpass(const LowpassOptions& o) {
  const DomainDataset input = load_manifest(o.manifest);
  frequency::LowPassSpec spec = frequency::LowPassSpec::for_resolution(input.resolution());
  if (o.tau > 0.0) spec.tau = o.tau;
  DomainDataset filtered = frequency::filter_dataset(input, spec);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  save_manifest(filtered, (dir / "filtered.tsv").string());
  describe("lowpass", {{"manifest", o.manifest}, {"tau", spec.tau}, {"out", o.out}},
           {{"input", hash_of(input)}, {"filtered", hash_of(filtered)}}, dir / "run.json");
  return 0;
}

struct TrainOptions {
  std::string scheme = "joint";
  std::string photos;
  std::string paintings;
  std::string stylized;
  std::string config;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out;
};

int run_train(const TrainOptions& o) {
  training::TrainingConfig cfg;
  if (!o.config.empty()) {
    const json doc = read_json(o.config);
    cfg = training::training_config_from_json(doc.contains("training") ? doc.at("training") : doc);
  }
  if (o.seed_given) cfg.seed = o.seed;
  cfg.validate();

  const DomainDataset photos = load_manifest(o.photos);
  std::optional<DomainDataset> paintings;
  std::optional<DomainDataset> stylized;
  if (!o.paintings.empty()) paintings = load_manifest(o.paintings);
  if (!o.stylized.empty()) stylized = load_manifest(o.stylized);
  auto need = [&](const std::optional<DomainDataset>& d, const char* flag) -> const DomainDataset& {
    if (!d) throw Error("cli.missing_input", "scheme '" + o.scheme + "' requires " + flag);
    return *d;
  };

  training::TrainedModel model;
  if (o.scheme == "joint") {
    std::vector<const DomainDataset*> parts{&photos};
    if (paintings) parts.push_back(&*paintings);
    if (stylized) parts.push_back(&*stylized);
    model = training::train_joint(parts, cfg);
  } else if (o.scheme == "stylized") {
    model = training::train_with_stylization(photos, need(stylized, "--stylized"), cfg);
  } else if (o.scheme == "multitask") {
    model = training::train_multitask(photos, need(paintings, "--paintings"), cfg);
  } else if (o.scheme == "finetune") {
    model = training::train_finetuned(photos, need(paintings, "--paintings"), cfg,
                                      cfg.finetune_epochs);
  } else if (o.scheme == "adversarial") {
    model = training::train_domain_adversarial(photos, need(paintings, "--paintings"), cfg,
                                               cfg.adversary_weight);
  } else {
    throw Error("cli.scheme", "unknown scheme '" + o.scheme + "'");
  }

  const fs::path dir(o.out);
  fs::create_directories(dir);
  training::save_checkpoint(model, (dir / "model.ckpt").string());
  training::write_training_log(model.log, (dir / "train_log.jsonl").string());
  json datasets{{"photos", hash_of(photos)}};
  if (paintings) datasets["paintings"] = hash_of(*paintings);
  if (stylized) datasets["stylized"] = hash_of(*stylized);
  describe("train",
           {{"scheme", o.scheme},
            {"photos", o.photos},
            {"paintings", o.paintings},
            {"stylized", o.stylized},
            {"training", training::to_json(cfg)},
            {"out", o.out},
            {"model_hash", hex64(model.hash())},
            {"warnings", model.log.warnings}},
           datasets, dir / "run.json");
  for (const auto& w : model.log.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

struct EvaluateOptions {
  std::string model;
  std::string clean;
  std::string corrupted;
  std::string ood;
  std::uint64_t seed = 0;
  std::string out;
};

int run_evaluate(const EvaluateOptions& o) {
  LoadedModel model = load_model(o.model);
  const DomainDataset clean = load_manifest(o.clean);
  const auto corrupted = load_corrupted(o.corrupted);
  std::optional<DomainDataset> ood;
  if (!o.ood.empty()) ood = load_manifest(o.ood);
  const auto report =
      evaluation::evaluate(*model.classifier, clean, corrupted, ood ? &*ood : nullptr, o.seed);
  write_text(o.out, evaluation::to_json(report).dump(2) + "\n");
  describe("evaluate",
           {{"model", o.model},
            {"clean", o.clean},
            {"corrupted", o.corrupted},
            {"ood", o.ood},
            {"seed", o.seed},
            {"out", o.out}},
           report.metadata.dataset_hashes, descriptor_for_file(o.out));
  return 0;
}

struct SpectrumOptions {
  std::vector<std::string> manifests;
  std::string out;
};

int run_spectrum(const SpectrumOptions& o) {
  std::ostringstream csv;
  csv << "dataset,r,mean_power\n";
  json hashes = json::object();
  for (const auto& path : o.manifests) {
    const DomainDataset d = load_manifest(path);
    const auto spectrum = frequency::mean_spectrum(d);
    const std::string name = fs::path(path).stem().string();
    for (std::size_t r = 0; r < spectrum.power.size(); ++r) {
      char buffer[64];
      std::snprintf(buffer, sizeof buffer, "%.10g", spectrum.power[r]);
      csv << name << ',' << r << ',' << buffer << '\n';
    }
    hashes[path] = hash_of(d);
  }
  write_text(o.out, csv.str());
  describe("analyze-spectrum", {{"manifests", o.manifests}, {"out", o.out}}, hashes,
           descriptor_for_file(o.out));
  return 0;
}

struct GramOptions {
  std::string content;
  std::string pool;
  std::string stylized;
  std::string pairs;
  std::string policy = "intradomain";
  std::string features = "filterbank";
  std::string model;
  std::size_t count = 500;
  std::uint64_t seed = 0;
  std::string out;
};

const ImageSample& find_sample(const DomainDataset& d, const std::string& id, const char* what) {
  const auto index = d.find(id);
  if (!index) throw Error("cli.pairs", std::string(what) + " id '" + id + "' not found");
  return d[*index];
}

// Pair sources, in order of precedence: a pairing table (content vs style
// image), a stylized manifest (content vs its stylized copy), or pairs drawn
// under the style policy.
int run_gram(const GramOptions& o) {
  const DomainDataset content = load_manifest(o.content);
  const DomainDataset pool = o.pool.empty() ? content : load_manifest(o.pool);
  if (content.empty()) throw Error("cli.empty", "content manifest is empty");
  stylization::StylePolicy policy;
  policy.kind = stylization::parse_policy(o.policy);

  std::unique_ptr<stylization::FeatureExtractor> extractor;
  std::optional<training::TrainedModel> trained;
  if (!o.model.empty()) {
    trained = training::load_checkpoint(o.model);
    extractor = std::make_unique<training::ModelFeatureExtractor>(*trained);
  } else if (o.features == "pixels") {
    extractor = std::make_unique<stylization::PixelFeatures>();
  } else if (o.features == "filterbank") {
    extractor = std::make_unique<stylization::FilterBankFeatures>();
  } else {
    throw Error("cli.features", "unknown feature extractor '" + o.features + "'");
  }

  json source;
  json hashes{{"content", hash_of(content)}, {"pool", hash_of(pool)}};
  std::vector<double> distances;
  if (!o.pairs.empty()) {
    for (const auto& p : stylization::load_pairing_table(o.pairs)) {
      const auto& c = find_sample(content, p.content_id, "content");
      const auto& s = find_sample(pool, p.style_id, "style");
      distances.push_back(stylization::gram_distance(c.pixels, s.pixels, *extractor));
    }
    source = {{"pairs", o.pairs}};
  } else if (!o.stylized.empty()) {
    const DomainDataset stylized = load_manifest(o.stylized);
    for (const auto& s : stylized.samples()) {
      const auto& c = find_sample(content, stylization::paired_content_id(s), "content");
      distances.push_back(stylization::gram_distance(c.pixels, s.pixels, *extractor));
    }
    source = {{"stylized", o.stylized}};
    hashes["stylized"] = hash_of(stylized);
  } else {
    Rng rng(derive_seed(o.seed, "analyze-gram"));
    for (std::size_t k = 0; k < o.count; ++k) {
      const ImageSample& c = content[rng.uniform_int(content.size())];
      const ImageSample& s = stylization::sample_style(c, pool, policy, rng);
      distances.push_back(stylization::gram_distance(c.pixels, s.pixels, *extractor));
    }
    source = {{"policy", std::string(stylization::to_string(policy.kind))},
              {"count", o.count},
              {"seed", o.seed}};
  }
  const auto summary = stylization::summarize(distances);
  json result = source;
  result["features"] = extractor->name();
  result["n"] = distances.size();
  result["mean"] = summary.mean;
  result["std"] = summary.stddev;
  write_text(o.out, result.dump(2) + "\n");

  json resolved = source;
  resolved["content"] = o.content;
  resolved["pool"] = o.pool.empty() ? o.content : o.pool;
  resolved["features"] = extractor->name();
  resolved["out"] = o.out;
  describe("analyze-gram", resolved, hashes, descriptor_for_file(o.out));
  return 0;
}

struct ReportOptions {
  std::vector<std::string> runs;
  std::string label = "runs";
  std::string out;
};

int run_report(const ReportOptions& o) {
  std::vector<evaluation::EvalReport> reports;
  for (const auto& run : o.runs) {
    fs::path path = run;
    if (fs::is_directory(path)) path /= "report.json";
    reports.push_back(evaluation::report_from_json(read_json(path.string())));
  }
  const auto agg = evaluation::aggregate_runs(reports);
  static const std::vector<std::pair<std::string, std::string>> columns = {
      {"clean", "clean"},           {"noise", "category:noise"},
      {"blur", "category:blur"},    {"weather", "category:weather"},
      {"digital", "category:digital"}, {"corruption_mean", "mean_corruption"},
      {"ood", "ood"},               {"combined_mean", "combined_mean"}};
  std::ostringstream csv;
  csv << "label,runs";
  for (const auto& [name, _] : columns) csv << ',' << name << "_mean," << name << "_std";
  csv << '\n' << o.label << ',' << agg.runs;
  for (const auto& [_, key] : columns) {
    const auto it = agg.metrics.find(key);
    if (it == agg.metrics.end()) {
      csv << ",,";
      continue;
    }
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, ",%.2f,%.2f", 100.0 * it->second.mean,
                  100.0 * it->second.stddev);
    csv << buffer;
  }
  csv << '\n';
  write_text(o.out, csv.str());
  describe("report", {{"runs", o.runs}, {"label", o.label}, {"out", o.out}},
           reports.front().metadata.dataset_hashes, descriptor_for_file(o.out));
  return 0;
}

struct SweepOptions {
  std::string config;
  std::string axis;
  std::vector<std::string> values;
};

int run_sweep_command(const SweepOptions& o) {
  experiment::ExperimentConfig cfg = experiment::load_experiment_config(o.config);
  experiment::SweepSpec sweep;
  if (cfg.sweep) sweep = *cfg.sweep;
  if (!o.axis.empty()) sweep.axis = o.axis;
  if (!o.values.empty()) sweep.values = o.values;
  if (sweep.axis.empty() || sweep.values.empty()) {
    throw Error("cli.sweep", "no sweep axis/values in the config or on the command line");
  }
  json resolved = experiment::to_json(cfg);
  resolved["sweep"] = {{"axis", sweep.axis}, {"values", sweep.values}};
  const fs::path out_dir = cfg.resolve(cfg.output_dir);
  fs::create_directories(out_dir);
  describe("sweep", resolved, json::object(), out_dir / "run.json");
  const auto result = experiment::run_sweep(cfg, sweep);
  std::cout << experiment::summary_csv(result);
  std::cout << "summary_hash " << result.summary_hash << '\n';
  std::size_t failures = 0;
  for (const auto& row : result.rows) failures += row.failures.size();
  return failures == 0 ? 0 : 1;
}

void print_usage_error(const CLI::App& app, const CLI::ParseError& e) {
  const CLI::App* target = &app;
  for (const CLI::App* sub : app.get_subcommands()) target = sub;
  std::cerr << "error: usage: " << e.what() << '\n' << target->help();
}

}  // namespace

int main(int argc, char** argv) {
  // Training allocates large short-lived matrices; keep them off mmap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"styleshift: corruption robustness experiments with stylized and painted data"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  PrepareOptions prepare;
  auto* sub_prepare = app.add_subcommand("prepare-data", "Render the desk dataset into manifests");
  sub_prepare->add_option("--source", prepare.source, "Digits CSV (optionally gzipped)");
  sub_prepare->add_option("--out", prepare.out, "Output directory")->required();
  sub_prepare->add_option("--resolution", prepare.resolution, "Image side length")
      ->check(CLI::Range(8, 4096));
  sub_prepare->add_option("--seed", prepare.seed, "Master seed");
  sub_prepare->add_option("--photos", prepare.photos, "Photo training images");
  sub_prepare->add_option("--paintings", prepare.paintings, "Painting training images");
  sub_prepare->add_option("--test", prepare.test, "Clean test images");
  sub_prepare->add_option("--ood", prepare.ood, "Out-of-distribution test images");

  CorruptOptions corrupt;
  auto* sub_corrupt = app.add_subcommand("corrupt", "Write corrupted copies of a test manifest");
  sub_corrupt->add_option("--manifest", corrupt.manifest, "Clean test manifest")->required();
  sub_corrupt->add_option("--out", corrupt.out, "Output directory")->required();
  sub_corrupt->add_option("--spec,--corruption", corrupt.specs, "name:severity (repeatable; default all 75)");
  sub_corrupt->add_option("--seed", corrupt.seed, "Master seed");

  StylizeOptions stylize;
  auto* sub_stylize = app.add_subcommand("stylize", "Moment-matching stylization of a dataset");
  sub_stylize->add_option("--content", stylize.content, "Content manifest")->required();
  sub_stylize->add_option("--pool", stylize.pool, "Style pool manifest (default: content)");
  sub_stylize->add_option("--policy", stylize.policy, "painting | intradomain | intraclass");
  sub_stylize->add_flag("--include-self", stylize.include_self,
                        "Allow an image to be its own style");
  sub_stylize->add_option("--feature-space", stylize.feature_space,
                          "decorrelated_color | raw_pixels");
  sub_stylize->add_option("--strength", stylize.strength, "Blend in [0, 1]")
      ->check(CLI::Range(0.0, 1.0));
  sub_stylize->add_option("--seed", stylize.seed, "Master seed");
  sub_stylize->add_option("--out", stylize.out, "Output directory")->required();

  LowpassOptions lowpass;
  auto* sub_lowpass = app.add_subcommand("lowpass", "Ideal circular low-pass filter a dataset");
  sub_lowpass->add_option("--manifest", lowpass.manifest, "Input manifest")->required();
  sub_lowpass->add_option("--tau", lowpass.tau, "Cutoff radius (default 60 * side / 224)");
  sub_lowpass->add_option("--out", lowpass.out, "Output directory")->required();

  TrainOptions train;
  auto* sub_train = app.add_subcommand("train", "Train a classifier");
  sub_train->add_option("--scheme", train.scheme,
                        "joint | stylized | multitask | finetune | adversarial");
  sub_train->add_option("--photos", train.photos, "Photo manifest")->required();
  sub_train->add_option("--paintings", train.paintings, "Painting manifest");
  sub_train->add_option("--stylized", train.stylized, "Stylized manifest");
  sub_train->add_option("--config", train.config, "Training or experiment config (JSON)");
  auto* seed_opt = sub_train->add_option("--seed", train.seed, "Seed (overrides the config)");
  sub_train->add_option("--out", train.out, "Output directory")->required();

  EvaluateOptions evaluate;
  auto* sub_eval = app.add_subcommand("evaluate", "Evaluate a model on clean, corrupted and OOD sets");
  sub_eval->add_option("--model", evaluate.model, "Checkpoint or stored-logit JSON")->required();
  sub_eval->add_option("--clean", evaluate.clean, "Clean test manifest")->required();
  sub_eval->add_option("--corrupted", evaluate.corrupted, "Directory written by 'corrupt'")
      ->required();
  sub_eval->add_option("--ood", evaluate.ood, "OOD test manifest");
  sub_eval->add_option("--seed", evaluate.seed, "Seed recorded in the report");
  sub_eval->add_option("--out", evaluate.out, "Report path")->required();

  SpectrumOptions spectrum;
  auto* sub_spectrum = app.add_subcommand("analyze-spectrum", "Radial power spectra of datasets");
  sub_spectrum->add_option("--manifest", spectrum.manifests, "Manifest (repeatable)")->required();
  sub_spectrum->add_option("--out", spectrum.out, "CSV path")->required();

  GramOptions gram;
  auto* sub_gram = app.add_subcommand("analyze-gram", "Gram-matrix style distance between pairs");
  sub_gram->add_option("--content", gram.content, "Content manifest")->required();
  sub_gram->add_option("--pool", gram.pool, "Style pool manifest (default: content)");
  sub_gram->add_option("--policy", gram.policy, "painting | intradomain | intraclass");
  sub_gram->add_option("--features", gram.features, "pixels | filterbank");
  sub_gram->add_option("--model", gram.model, "Use a trained backbone's activations");
  sub_gram->add_option("--pairs", gram.pairs, "Pairing table (content_id, style_id, ...)");
  sub_gram->add_option("--stylized", gram.stylized, "Stylized manifest paired with --content");
  sub_gram->add_option("--count", gram.count, "Pairs to draw under --policy");
  sub_gram->add_option("--seed", gram.seed, "Master seed");
  sub_gram->add_option("--out", gram.out, "JSON path")->required();

  ReportOptions report;
  auto* sub_report = app.add_subcommand("report", "Aggregate run reports into a table");
  sub_report->add_option("--runs", report.runs, "report.json files or run directories")
      ->required()
      ->expected(2, -1);
  sub_report->add_option("--label", report.label, "Row label");
  sub_report->add_option("--out", report.out, "CSV path")->required();

  SweepOptions sweep;
  auto* sub_sweep = app.add_subcommand("sweep", "Run an experiment sweep");
  sub_sweep->add_option("--config", sweep.config, "Experiment config (JSON)")->required();
  sub_sweep->add_option("--axis", sweep.axis, "Override the sweep axis");
  sub_sweep->add_option("--values", sweep.values, "Override the axis values")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_usage_error(app, e);
    return 2;
  }

  try {
    if (*sub_prepare) return run_prepare(prepare);
    if (*sub_corrupt) return run_corrupt(corrupt);
    if (*sub_stylize) return run_stylize(stylize);
    if (*sub_lowpass) return run_lowpass(lowpass);
    if (*sub_train) {
      train.seed_given = seed_opt->count() > 0;
      return run_train(train);
    }
    if (*sub_eval) return run_evaluate(evaluate);
    if (*sub_spectrum) return run_spectrum(spectrum);
    if (*sub_gram) return run_gram(gram);
    if (*sub_report) return run_report(report);
    if (*sub_sweep) return run_sweep_command(sweep);
  } catch (const Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
