#include "styleshift/evaluation.hpp"

#include <cmath>
#include <set>

#include "styleshift/error.hpp"
#include "styleshift/nn.hpp"
#include "styleshift/random.hpp"

namespace styleshift::evaluation {

using nlohmann::json;
namespace corr = styleshift::corruptions;

double accuracy_from_predictions(const std::vector<int>& predictions,
                                 const DomainDataset& dataset) {
  if (dataset.empty()) throw Error("evaluation.empty", "accuracy of an empty dataset");
  if (predictions.size() != dataset.size()) {
    throw Error("evaluation.predictions", "prediction count does not match dataset size");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == dataset[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

double accuracy(const Classifier& model, const DomainDataset& dataset, std::string_view set_key) {
  if (dataset.empty()) throw Error("evaluation.empty", "accuracy of an empty dataset");
  return accuracy_from_predictions(model.predict_set(set_key, dataset), dataset);
}

double category_accuracy(const AccuracyTable& table, corr::Category category) {
  double total = 0.0;
  int count = 0;
  for (const std::string& name : corr::corruptions_in(category)) {
    for (int s = corr::kMinSeverity; s <= corr::kMaxSeverity; ++s) {
      const auto it = table.find({name, s});
      if (it == table.end()) {
        throw Error("evaluation.missing_set",
                    "missing corrupted set (" + name + ", " + std::to_string(s) + ")");
      }
      total += it->second;
      ++count;
    }
  }
  return total / count;
}

double mean_corruption_accuracy(const AccuracyTable& table) {
  double total = 0.0;
  for (corr::Category c : corr::kCategories) total += category_accuracy(table, c);
  return total / static_cast<double>(corr::kCategories.size());
}

AccuracyTable corruption_accuracies(const Classifier& model,
                                    const std::vector<corr::CorruptedSet>& sets) {
  AccuracyTable table;
  for (const corr::CorruptedSet& set : sets) {
    const auto key = std::make_pair(set.spec.name, set.spec.severity);
    if (table.count(key)) {
      throw Error("evaluation.duplicate_set", "corrupted set " + set.spec.key() + " given twice");
    }
    table[key] = accuracy(model, set.samples, set.spec.key());
  }
  return table;
}

double category_accuracy(const Classifier& model, const std::vector<corr::CorruptedSet>& sets,
                         corr::Category category) {
  std::vector<corr::CorruptedSet> subset;
  for (const auto& set : sets) {
    if (set.spec.category == category) subset.push_back(set);
  }
  return category_accuracy(corruption_accuracies(model, subset), category);
}

double mean_corruption_accuracy(const Classifier& model,
                                const std::vector<corr::CorruptedSet>& sets) {
  return mean_corruption_accuracy(corruption_accuracies(model, sets));
}

double combined_mean(double corruption_acc, double ood_acc) {
  return (corruption_acc + ood_acc) / 2.0;
}

double combined_mean(double corruption_acc, std::optional<double> ood_acc) {
  if (!ood_acc) throw Error("evaluation.missing_ood", "combined mean needs an OOD accuracy");
  return combined_mean(corruption_acc, *ood_acc);
}

// -- EvalReport ------------------------------------------------------------

namespace {

constexpr double kConsistencyTolerance = 1e-9;

bool in_unit_interval(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void EvalReport::check_invariants() const {
  auto fail = [](const std::string& msg) { throw Error("evaluation.report", msg); };
  if (!in_unit_interval(clean_acc)) fail("clean_acc outside [0, 1]");
  for (const auto& [key, acc] : per_corruption) {
    if (!in_unit_interval(acc)) fail("accuracy for " + key.first + " outside [0, 1]");
  }
  double category_total = 0.0;
  for (corr::Category c : corr::kCategories) {
    const std::string name(corr::to_string(c));
    const auto it = per_category.find(name);
    if (it == per_category.end()) fail("missing category " + name);
    const double expected = category_accuracy(per_corruption, c);
    if (std::abs(it->second - expected) > kConsistencyTolerance) {
      fail("per_category[" + name + "] disagrees with per_corruption");
    }
    category_total += it->second;
  }
  if (per_category.size() != corr::kCategories.size()) fail("unexpected category entries");
  if (std::abs(mean_corruption_acc - category_total / 4.0) > kConsistencyTolerance) {
    fail("mean_corruption_acc disagrees with per_category");
  }
  if (ood_acc && !in_unit_interval(*ood_acc)) fail("ood_acc outside [0, 1]");
  if (combined_mean.has_value() != ood_acc.has_value()) {
    fail("combined_mean must be present exactly when ood_acc is");
  }
  if (combined_mean &&
      std::abs(*combined_mean - evaluation::combined_mean(mean_corruption_acc, *ood_acc)) >
          kConsistencyTolerance) {
    fail("combined_mean disagrees with its inputs");
  }
}

EvalReport EvalReport::build(double clean_acc, AccuracyTable per_corruption,
                             std::optional<double> ood_acc, ReportMetadata metadata) {
  EvalReport r;
  r.clean_acc = clean_acc;
  r.per_corruption = std::move(per_corruption);
  for (corr::Category c : corr::kCategories) {
    r.per_category[std::string(corr::to_string(c))] = category_accuracy(r.per_corruption, c);
  }
  r.mean_corruption_acc = mean_corruption_accuracy(r.per_corruption);
  r.ood_acc = ood_acc;
  if (ood_acc) r.combined_mean = evaluation::combined_mean(r.mean_corruption_acc, *ood_acc);
  r.metadata = std::move(metadata);
  r.check_invariants();
  return r;
}

json to_json(const EvalReport& r) {
  r.check_invariants();
  json per_corruption = json::object();
  for (const auto& [key, acc] : r.per_corruption) {
    per_corruption[key.first][std::to_string(key.second)] = 100.0 * acc;
  }
  json per_category = json::object();
  for (const auto& [name, acc] : r.per_category) per_category[name] = 100.0 * acc;
  json doc{{"units", "percent"},
           {"clean_acc", 100.0 * r.clean_acc},
           {"per_corruption", per_corruption},
           {"per_category", per_category},
           {"mean_corruption_acc", 100.0 * r.mean_corruption_acc},
           {"metadata",
            {{"model", r.metadata.model},
             {"dataset_hashes", r.metadata.dataset_hashes},
             {"seed", r.metadata.seed},
             {"severity_tables", std::string(corr::severity_table_version())}}}};
  if (r.ood_acc) doc["ood_acc"] = 100.0 * *r.ood_acc;
  if (r.combined_mean) doc["combined_mean"] = 100.0 * *r.combined_mean;
  return doc;
}

EvalReport report_from_json(const json& doc) {
  try {
    AccuracyTable table;
    for (const auto& [name, severities] : doc.at("per_corruption").items()) {
      for (const auto& [sev, value] : severities.items()) {
        table[{name, std::stoi(sev)}] = value.get<double>() / 100.0;
      }
    }
    std::optional<double> ood;
    if (doc.contains("ood_acc")) ood = doc.at("ood_acc").get<double>() / 100.0;
    ReportMetadata meta;
    const json& m = doc.at("metadata");
    meta.model = m.at("model").get<std::string>();
    meta.dataset_hashes = m.at("dataset_hashes").get<std::map<std::string, std::string>>();
    meta.seed = m.at("seed").get<std::uint64_t>();
    EvalReport r = EvalReport::build(doc.at("clean_acc").get<double>() / 100.0, std::move(table),
                                     ood, std::move(meta));
    return r;
  } catch (const json::exception& e) {
    throw Error("evaluation.report", std::string("malformed report: ") + e.what());
  }
}

EvalReport evaluate(const Classifier& model, const DomainDataset& clean_test,
                    const std::vector<corr::CorruptedSet>& corrupted, const DomainDataset* ood_test,
                    std::uint64_t seed) {
  ReportMetadata meta;
  meta.model = model.identity();
  meta.seed = seed;
  meta.dataset_hashes["clean"] = hex64(clean_test.content_hash());
  Fnv1a corrupted_hash;
  for (const auto& set : corrupted) {
    corrupted_hash.add(set.spec.key());
    corrupted_hash.add(set.samples.content_hash());
  }
  meta.dataset_hashes["corrupted"] = hex64(corrupted_hash.value());
  if (ood_test != nullptr) meta.dataset_hashes["ood"] = hex64(ood_test->content_hash());

  const double clean = accuracy(model, clean_test, "clean");
  AccuracyTable table = corruption_accuracies(model, corrupted);
  std::optional<double> ood;
  if (ood_test != nullptr) ood = accuracy(model, *ood_test, "ood");
  return EvalReport::build(clean, std::move(table), ood, std::move(meta));
}

// -- Aggregation -----------------------------------------------------------

std::map<std::string, double> report_metrics(const EvalReport& r) {
  std::map<std::string, double> m;
  m["clean"] = r.clean_acc;
  m["mean_corruption"] = r.mean_corruption_acc;
  for (const auto& [name, acc] : r.per_category) m["category:" + name] = acc;
  for (const auto& [key, acc] : r.per_corruption) {
    m[key.first + ":" + std::to_string(key.second)] = acc;
  }
  if (r.ood_acc) m["ood"] = *r.ood_acc;
  if (r.combined_mean) m["combined_mean"] = *r.combined_mean;
  return m;
}

RunAggregate aggregate_runs(const std::vector<EvalReport>& reports) {
  if (reports.size() < 2) throw Error("evaluation.aggregate", "aggregation needs >= 2 reports");
  const auto& hashes = reports.front().metadata.dataset_hashes;
  for (const auto& r : reports) {
    if (r.metadata.dataset_hashes != hashes) {
      throw Error("evaluation.inconsistent", "reports were computed on different datasets");
    }
  }
  RunAggregate agg;
  agg.runs = reports.size();
  const auto first = report_metrics(reports.front());
  for (const auto& r : reports) {
    const auto metrics = report_metrics(r);
    if (metrics.size() != first.size()) {
      throw Error("evaluation.inconsistent", "reports carry different metric sets");
    }
    for (const auto& [name, value] : metrics) {
      if (!first.count(name)) {
        throw Error("evaluation.inconsistent", "metric " + name + " missing from some reports");
      }
      agg.metrics[name].values.push_back(value);
    }
  }
  for (auto& [name, summary] : agg.metrics) {
    double total = 0.0;
    for (double v : summary.values) total += v;
    summary.mean = total / static_cast<double>(summary.values.size());
    double sq = 0.0;
    for (double v : summary.values) sq += (v - summary.mean) * (v - summary.mean);
    summary.stddev = std::sqrt(sq / static_cast<double>(summary.values.size()));
  }
  return agg;
}

json to_json(const RunAggregate& agg) {
  json metrics = json::object();
  for (const auto& [name, s] : agg.metrics) {
    metrics[name] = {{"mean", 100.0 * s.mean}, {"std", 100.0 * s.stddev}};
  }
  return {{"units", "percent"}, {"runs", agg.runs}, {"metrics", metrics}};
}

// -- Stored-logit classifier -----------------------------------------------

void StoredLogitClassifier::set(std::string set_key, std::string sample_id,
                                std::vector<double> logits) {
  logits_[std::move(set_key)][std::move(sample_id)] = std::move(logits);
}

std::vector<int> StoredLogitClassifier::predict_set(std::string_view set_key,
                                                    const DomainDataset& dataset) const {
  auto table = logits_.find(std::string(set_key));
  if (table == logits_.end()) table = logits_.find("*");
  if (table == logits_.end()) {
    throw Error("evaluation.stub", "no stored logits for set '" + std::string(set_key) + "'");
  }
  std::vector<int> out;
  out.reserve(dataset.size());
  for (const auto& s : dataset.samples()) {
    const auto it = table->second.find(s.id);
    if (it == table->second.end()) {
      throw Error("evaluation.stub", "no stored logits for sample '" + s.id + "' in set '" +
                                         std::string(set_key) + "'");
    }
    out.push_back(nn::argmax(it->second));
  }
  return out;
}

std::string StoredLogitClassifier::identity() const {
  Fnv1a h;
  h.add(name_);
  for (const auto& [set, table] : logits_) {
    h.add(set);
    for (const auto& [id, values] : table) {
      h.add(id);
      for (double v : values) h.add(v);
    }
  }
  return "stub:" + name_ + ":" + hex64(h.value());
}

StoredLogitClassifier StoredLogitClassifier::from_json(const json& doc) {
  StoredLogitClassifier stub;
  try {
    stub.name_ = doc.value("name", std::string("stored-logits"));
    for (const auto& [set, table] : doc.at("logits").items()) {
      for (const auto& [id, values] : table.items()) {
        stub.set(set, id, values.get<std::vector<double>>());
      }
    }
  } catch (const json::exception& e) {
    throw Error("evaluation.stub", std::string("malformed stored-logit file: ") + e.what());
  }
  return stub;
}

}  // namespace styleshift::evaluation
