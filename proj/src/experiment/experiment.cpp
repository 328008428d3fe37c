#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "styleshift/error.hpp"
#include "styleshift/experiment.hpp"

namespace styleshift::experiment {

using nlohmann::json;
namespace fs = std::filesystem;

// -- Configuration ---------------------------------------------------------

namespace {

constexpr const char* kDataRootVar = "STYLESHIFT_DATA_ROOT";

std::string substitute_env(const std::string& path) {
  const std::string token = std::string("${") + kDataRootVar + "}";
  const auto pos = path.find(token);
  if (pos == std::string::npos) return path;
  const char* root = std::getenv(kDataRootVar);
  if (root == nullptr) {
    throw Error("config.env", std::string(kDataRootVar) + " is referenced but not set");
  }
  std::string out = path;
  out.replace(pos, token.size(), root);
  return substitute_env(out);
}

void reject_unknown(const json& doc, const std::set<std::string>& known, const std::string& where) {
  if (!doc.is_object()) throw Error("config.type", where + " must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (!known.count(key)) throw Error("config.unknown_key", "unknown key '" + key + "' in " + where);
  }
}

std::string value_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) {
    std::ostringstream os;
    os << v.get<double>();
    return os.str();
  }
  throw Error("config.type", "sweep values must be strings or numbers");
}

}  // namespace

std::string ExperimentConfig::resolve(const std::string& path) const {
  if (path.empty()) return path;
  const fs::path p(substitute_env(path));
  if (p.is_absolute()) return p.lexically_normal().string();
  return (base_dir / p).lexically_normal().string();
}

ExperimentConfig experiment_config_from_json(const json& doc, const fs::path& base_dir) {
  reject_unknown(doc,
                 {"data", "output_dir", "scheme", "style_policy", "stylizer", "training", "lowpass",
                  "corruption_seed", "seeds", "budget", "sweep", "description"},
                 "experiment");
  ExperimentConfig c;
  c.base_dir = base_dir;
  try {
    const json& data = doc.at("data");
    reject_unknown(data, {"photos", "paintings", "test", "ood"}, "data");
    c.data.photos = data.at("photos").get<std::string>();
    c.data.test = data.at("test").get<std::string>();
    c.data.paintings = data.value("paintings", std::string());
    c.data.ood = data.value("ood", std::string());
    c.output_dir = doc.value("output_dir", c.output_dir);
    c.scheme = doc.value("scheme", c.scheme);
    if (doc.contains("style_policy")) {
      const json& p = doc.at("style_policy");
      reject_unknown(p, {"kind", "exclude_self"}, "style_policy");
      c.style_policy.kind = stylization::parse_policy(p.value("kind", "intradomain"));
      c.style_policy.exclude_self = p.value("exclude_self", true);
    }
    if (doc.contains("stylizer")) {
      const json& s = doc.at("stylizer");
      reject_unknown(s, {"feature_space", "strength"}, "stylizer");
      c.stylizer.feature_space =
          stylization::parse_feature_space(s.value("feature_space", "decorrelated_color"));
      if (c.stylizer.feature_space == stylization::FeatureSpace::plugin_features) {
        throw Error("config.stylizer", "plugin feature spaces cannot be selected from a config");
      }
      c.stylizer.strength = s.value("strength", 1.0);
    }
    if (doc.contains("training")) c.training = training::training_config_from_json(doc.at("training"));
    if (doc.contains("lowpass")) {
      const json& l = doc.at("lowpass");
      reject_unknown(l, {"tau"}, "lowpass");
      c.lowpass.tau = l.at("tau").get<double>();
      c.lowpass_from_resolution = false;
      if (!(c.lowpass.tau > 0.0)) throw Error("config.lowpass", "tau must be positive");
    }
    c.corruption_seed = doc.value("corruption_seed", std::uint64_t{0});
    if (doc.contains("seeds")) c.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    c.budget = doc.value("budget", std::size_t{0});
    if (doc.contains("sweep")) {
      const json& s = doc.at("sweep");
      reject_unknown(s, {"axis", "values"}, "sweep");
      SweepSpec spec;
      spec.axis = s.at("axis").get<std::string>();
      for (const json& v : s.at("values")) spec.values.push_back(value_string(v));
      c.sweep = spec;
    }
  } catch (const json::exception& e) {
    throw Error("config.type", std::string("bad experiment config: ") + e.what());
  }
  if (c.seeds.empty()) throw Error("config.seeds", "seed list must not be empty");
  if (c.stylizer.strength < 0.0 || c.stylizer.strength > 1.0) {
    throw Error("config.stylizer", "stylizer strength must be in [0, 1]");
  }
  for (const std::string* path : {&c.data.photos, &c.data.paintings, &c.data.test, &c.data.ood}) {
    if (!path->empty() && !fs::exists(c.resolve(*path))) {
      throw Error("config.missing_manifest", "manifest not found: " + c.resolve(*path));
    }
  }
  if (c.sweep) {
    bool known = false;
    for (const auto& axis : kSweepAxes) known = known || axis == c.sweep->axis;
    if (!known) throw Error("config.sweep", "unknown sweep axis '" + c.sweep->axis + "'");
    if (c.sweep->values.empty()) throw Error("config.sweep", "sweep needs at least one value");
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io.read", "cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("config.parse", path + ": " + e.what());
  }
  return experiment_config_from_json(doc, fs::absolute(path).parent_path());
}

json to_json(const ExperimentConfig& c) {
  json doc{{"data",
            {{"photos", c.resolve(c.data.photos)},
             {"paintings", c.resolve(c.data.paintings)},
             {"test", c.resolve(c.data.test)},
             {"ood", c.resolve(c.data.ood)}}},
           {"output_dir", c.resolve(c.output_dir)},
           {"scheme", c.scheme},
           {"style_policy",
            {{"kind", std::string(stylization::to_string(c.style_policy.kind))},
             {"exclude_self", c.style_policy.exclude_self}}},
           {"stylizer",
            {{"feature_space", std::string(stylization::to_string(c.stylizer.feature_space))},
             {"strength", c.stylizer.strength}}},
           {"training", training::to_json(c.training)},
           {"corruption_seed", c.corruption_seed},
           {"seeds", c.seeds},
           {"budget", c.budget}};
  if (!c.lowpass_from_resolution) doc["lowpass"] = {{"tau", c.lowpass.tau}};
  if (c.sweep) doc["sweep"] = {{"axis", c.sweep->axis}, {"values", c.sweep->values}};
  return doc;
}

// -- Data ------------------------------------------------------------------

ExperimentData load_experiment_data(const ExperimentConfig& config) {
  ExperimentData data;
  data.photos = load_manifest(config.resolve(config.data.photos));
  data.test = load_manifest(config.resolve(config.data.test));
  if (!config.data.paintings.empty()) {
    data.paintings = load_manifest(config.resolve(config.data.paintings));
  }
  if (!config.data.ood.empty()) data.ood = load_manifest(config.resolve(config.data.ood));
  data.corrupted =
      corruptions::corrupt_dataset(data.test, corruptions::all_specs(), config.corruption_seed);
  return data;
}

// -- Cells -----------------------------------------------------------------

CellSpec cell_for_axis(const ExperimentConfig& config, const std::string& axis,
                       const std::string& value) {
  CellSpec cell;
  cell.label = value;
  cell.scheme = config.scheme;
  cell.policy = config.style_policy;
  if (axis == "style_policy") {
    if (value == "none") {
      cell.scheme = "joint";
      cell.sources = "photos";
    } else {
      cell.policy.kind = stylization::parse_policy(value);
      cell.scheme = "stylized";
      cell.sources = "photos+stylized";
    }
  } else if (axis == "classifier_scheme") {
    if (value == "photo_only") {
      cell.scheme = "joint";
      cell.sources = "photos";
    } else {
      static const std::set<std::string> schemes = {
          "joint", "multitask", "multitask_lr_normalized", "finetune", "adversarial"};
      if (!schemes.count(value)) {
        throw Error("config.sweep", "unknown classifier scheme '" + value + "'");
      }
      cell.scheme = value;
      cell.sources = "photos+paintings";
    }
  } else if (axis == "painting_fraction") {
    double f = 0.0;
    try {
      f = std::stod(value);
    } catch (const std::exception&) {
      throw Error("config.sweep", "painting fraction '" + value + "' is not a number");
    }
    if (f < 0.0 || f > 1.0) throw Error("config.sweep", "painting fraction outside [0, 1]");
    cell.painting_fraction = f;
    cell.sources = "photos+paintings";
  } else if (axis == "lf_ablation" || axis == "combined_sources") {
    cell.sources = value;
  } else {
    throw Error("config.sweep", "unknown sweep axis '" + axis + "'");
  }
  return cell;
}

namespace {

std::vector<std::string> split_sources(const std::string& sources) {
  std::vector<std::string> tokens;
  std::string token;
  std::istringstream is(sources);
  while (std::getline(is, token, '+')) {
    static const std::set<std::string> known = {"photos",   "photos_lf",   "paintings",
                                                "paintings_lf", "stylized", "stylized_lf"};
    if (!known.count(token)) throw Error("config.sources", "unknown data source '" + token + "'");
    tokens.push_back(token);
  }
  if (tokens.empty()) throw Error("config.sources", "empty source recipe");
  return tokens;
}

DomainDataset merge_as(const std::vector<const DomainDataset*>& parts, Domain domain) {
  DomainDataset out(parts.front()->num_classes(), domain, parts.front()->resolution());
  for (const DomainDataset* p : parts) {
    for (const auto& s : p->samples()) out.mutable_samples().push_back(s);
  }
  return out;
}

}  // namespace

CellResult run_cell(const ExperimentConfig& config, const ExperimentData& data,
                    const CellSpec& cell, std::uint64_t seed) {
  training::TrainingConfig tcfg = config.training;
  tcfg.seed = seed;
  if (cell.scheme == "multitask_lr_normalized") tcfg.lr_normalization = true;
  const frequency::LowPassSpec lowpass = config.lowpass_from_resolution
                                             ? frequency::LowPassSpec::for_resolution(
                                                   data.photos.resolution())
                                             : config.lowpass;

  DomainDataset photos = data.photos;
  std::optional<DomainDataset> paintings = data.paintings;
  if (cell.painting_fraction) {
    if (!paintings) throw Error("config.sources", "painting_fraction needs a painting set");
    const std::size_t budget = config.budget > 0 ? config.budget : data.photos.size();
    auto split = make_budget_split(data.photos, *paintings,
                                   BudgetSplit::make(budget, *cell.painting_fraction),
                                   derive_seed(seed, "budget"));
    photos = std::move(split.first);
    paintings = std::move(split.second);
  }

  std::vector<DomainDataset> owned;
  owned.reserve(8);
  std::optional<stylization::StylizedDataset> stylized;
  bool has_photos = false;
  for (const std::string& token : split_sources(cell.sources)) {
    const bool lf = token.size() > 3 && token.substr(token.size() - 3) == "_lf";
    const std::string base = lf ? token.substr(0, token.size() - 3) : token;
    DomainDataset part;
    if (base == "photos") {
      part = photos;
      has_photos = has_photos || !lf;
    } else if (base == "paintings") {
      if (!paintings) throw Error("config.sources", "recipe uses paintings but none are configured");
      part = *paintings;
    } else {
      if (!stylized) {
        const DomainDataset* pool = &photos;
        if (cell.policy.kind == stylization::PolicyKind::painting_pool) {
          if (!paintings) throw Error("config.sources", "painting style pool is not configured");
          pool = &*paintings;
        }
        stylized = stylization::stylize_dataset(photos, *pool, cell.policy, config.stylizer,
                                                derive_seed(seed, "stylize", cell.label));
      }
      part = stylized->dataset;
    }
    if (lf) part = frequency::filter_dataset(part, lowpass);
    if (part.empty()) continue;
    owned.push_back(std::move(part));
  }
  if (owned.empty()) throw Error("training.empty", "cell '" + cell.label + "' has no training data");

  std::vector<const DomainDataset*> parts;
  std::size_t training_size = 0;
  for (const auto& d : owned) {
    parts.push_back(&d);
    training_size += d.size();
  }

  training::TrainedModel model;
  const bool two_stream = cell.scheme == "multitask" || cell.scheme == "multitask_lr_normalized" ||
                          cell.scheme == "finetune" || cell.scheme == "adversarial";
  if (two_stream) {
    if (!has_photos || owned.size() < 2) {
      throw Error("config.sources", "scheme '" + cell.scheme + "' needs photos plus another source");
    }
    std::vector<const DomainDataset*> others(parts.begin() + 1, parts.end());
    const DomainDataset other = merge_as(others, Domain::painting);
    if (cell.scheme == "finetune") {
      model = training::train_finetuned(owned.front(), other, tcfg, tcfg.finetune_epochs);
    } else if (cell.scheme == "adversarial") {
      model = training::train_domain_adversarial(owned.front(), other, tcfg, tcfg.adversary_weight);
    } else {
      model = training::train_multitask(owned.front(), other, tcfg);
    }
  } else if (cell.scheme == "stylized" && cell.sources == "photos+stylized") {
    model = training::train_with_stylization(owned.at(0), owned.at(1), tcfg);
  } else if (cell.scheme == "joint" || cell.scheme == "stylized") {
    model = training::train_joint(parts, tcfg);
  } else {
    throw Error("config.scheme", "unknown scheme '" + cell.scheme + "'");
  }

  CellResult result;
  result.report = evaluation::evaluate(model, data.test, data.corrupted,
                                       data.ood ? &*data.ood : nullptr, seed);
  result.log = model.log;
  result.model_hash = model.hash();
  result.training_size = training_size;
  return result;
}

// -- Sweeps ----------------------------------------------------------------

namespace {

std::string sanitize(const std::string& value) {
  std::string out;
  for (char c : value) {
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c
                                                                                              : '_';
  }
  return out;
}

evaluation::RunAggregate aggregate_any(const std::vector<evaluation::EvalReport>& reports) {
  if (reports.size() >= 2) return evaluation::aggregate_runs(reports);
  evaluation::RunAggregate agg;
  agg.runs = reports.size();
  for (const auto& [name, value] : evaluation::report_metrics(reports.front())) {
    agg.metrics[name] = {value, 0.0, {value}};
  }
  return agg;
}

const std::vector<std::pair<std::string, std::string>>& summary_columns() {
  static const std::vector<std::pair<std::string, std::string>> columns = {
      {"clean", "clean"},
      {"mean_corruption", "mean_corruption"},
      {"noise", "category:noise"},
      {"blur", "category:blur"},
      {"weather", "category:weather"},
      {"digital", "category:digital"},
      {"ood", "ood"},
      {"combined_mean", "combined_mean"}};
  return columns;
}

}  // namespace

std::string summary_csv(const SweepResult& result) {
  std::ostringstream os;
  os << "axis,value,runs";
  for (const auto& [column, _] : summary_columns()) os << ',' << column << "_mean," << column << "_std";
  os << '\n';
  char buffer[64];
  for (const SweepRow& row : result.rows) {
    os << result.axis << ',' << row.value << ',' << row.runs;
    for (const auto& [_, key] : summary_columns()) {
      if (row.aggregate && row.aggregate->metrics.count(key)) {
        const auto& m = row.aggregate->metrics.at(key);
        std::snprintf(buffer, sizeof buffer, ",%.4f,%.4f", 100.0 * m.mean, 100.0 * m.stddev);
        os << buffer;
      } else {
        os << ",,";
      }
    }
    os << '\n';
  }
  return os.str();
}

json summary_json(const SweepResult& result) {
  json rows = json::array();
  for (const SweepRow& row : result.rows) {
    json r{{"value", row.value}, {"runs", row.runs}, {"failures", row.failures}};
    if (row.aggregate) r["aggregate"] = evaluation::to_json(*row.aggregate);
    rows.push_back(r);
  }
  return {{"axis", result.axis}, {"rows", rows}, {"summary_hash", result.summary_hash}};
}

SweepResult run_sweep(const ExperimentConfig& config, const SweepSpec& sweep) {
  bool known = false;
  for (const auto& axis : kSweepAxes) known = known || axis == sweep.axis;
  if (!known) throw Error("config.sweep", "unknown sweep axis '" + sweep.axis + "'");

  const ExperimentData data = load_experiment_data(config);
  const fs::path out_dir = config.resolve(config.output_dir);
  fs::create_directories(out_dir);

  SweepResult result;
  result.axis = sweep.axis;
  for (const std::string& value : sweep.values) {
    SweepRow row;
    row.value = value;
    for (std::uint64_t seed : config.seeds) {
      const fs::path cell_dir = out_dir / sanitize(value) / ("seed_" + std::to_string(seed));
      try {
        const CellSpec cell = cell_for_axis(config, sweep.axis, value);
        CellResult cr = run_cell(config, data, cell, seed);
        fs::create_directories(cell_dir);
        std::ofstream(cell_dir / "report.json") << evaluation::to_json(cr.report).dump(2) << '\n';
        training::write_training_log(cr.log, (cell_dir / "train_log.jsonl").string());
        row.reports.push_back(std::move(cr.report));
      } catch (const std::exception& e) {
        std::string code = "error";
        if (const auto* err = dynamic_cast<const Error*>(&e)) code = err->code();
        row.failures.push_back("seed " + std::to_string(seed) + ": " + code + ": " + e.what());
        std::cerr << "sweep cell " << value << " seed " << seed << " failed: " << e.what() << '\n';
      }
    }
    row.runs = row.reports.size();
    if (!row.reports.empty()) {
      try {
        row.aggregate = aggregate_any(row.reports);
      } catch (const std::exception& e) {
        row.failures.push_back(std::string("aggregate: ") + e.what());
      }
    }
    result.rows.push_back(std::move(row));
  }

  const std::string csv = summary_csv(result);
  result.summary_hash = hex64(Fnv1a().add(summary_json(result).dump()).value());
  std::ofstream(out_dir / "summary.csv") << csv;
  std::ofstream(out_dir / "summary.json") << summary_json(result).dump(2) << '\n';
  return result;
}

}  // namespace styleshift::experiment
