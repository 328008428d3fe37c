#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "styleshift/classifier.hpp"
#include "styleshift/corruptions.hpp"
#include "styleshift/datamodel.hpp"

namespace styleshift::evaluation {

/// Fraction of samples whose prediction equals the label.
double accuracy(const Classifier& model, const DomainDataset& dataset,
                std::string_view set_key = "clean");
double accuracy_from_predictions(const std::vector<int>& predictions,
                                 const DomainDataset& dataset);

/// (corruption name, severity) -> accuracy.
using AccuracyTable = std::map<std::pair<std::string, int>, double>;

/// Mean over the category's corruptions and severities 1..5.
double category_accuracy(const AccuracyTable& table, corruptions::Category category);
/// Mean of the four category accuracies.
double mean_corruption_accuracy(const AccuracyTable& table);

AccuracyTable corruption_accuracies(const Classifier& model,
                                    const std::vector<corruptions::CorruptedSet>& sets);
double category_accuracy(const Classifier& model,
                         const std::vector<corruptions::CorruptedSet>& sets,
                         corruptions::Category category);
double mean_corruption_accuracy(const Classifier& model,
                                const std::vector<corruptions::CorruptedSet>& sets);

/// Arithmetic mean of corruption and OOD accuracy.
double combined_mean(double corruption_acc, double ood_acc);
double combined_mean(double corruption_acc, std::optional<double> ood_acc);

struct ReportMetadata {
  std::string model;
  std::map<std::string, std::string> dataset_hashes;
  std::uint64_t seed = 0;
};

struct EvalReport {
  double clean_acc = 0.0;
  AccuracyTable per_corruption;
  std::map<std::string, double> per_category;
  double mean_corruption_acc = 0.0;
  std::optional<double> ood_acc;
  std::optional<double> combined_mean;
  ReportMetadata metadata;

  /// Throws unless the category and mean fields agree with per_corruption.
  void check_invariants() const;

  /// Builds a report from raw accuracies, deriving the aggregate fields.
  static EvalReport build(double clean_acc, AccuracyTable per_corruption,
                          std::optional<double> ood_acc, ReportMetadata metadata);
};

/// Accuracies are rendered as percentages in the document.
nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& doc);

EvalReport evaluate(const Classifier& model, const DomainDataset& clean_test,
                    const std::vector<corruptions::CorruptedSet>& corrupted,
                    const DomainDataset* ood_test, std::uint64_t seed = 0);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::vector<double> values;
};

struct RunAggregate {
  std::map<std::string, MetricSummary> metrics;
  std::size_t runs = 0;
};

/// Flat metric map of a report: clean, mean_corruption, category:<name>,
/// <corruption>:<severity>, ood, combined_mean.
std::map<std::string, double> report_metrics(const EvalReport& report);

RunAggregate aggregate_runs(const std::vector<EvalReport>& reports);
nlohmann::json to_json(const RunAggregate& aggregate);

/// Stored-logit classifier: logits keyed by (set key, sample id).
class StoredLogitClassifier final : public Classifier {
 public:
  void set(std::string set_key, std::string sample_id, std::vector<double> logits);
  std::vector<int> predict_set(std::string_view set_key,
                               const DomainDataset& dataset) const override;
  std::string identity() const override;

  /// {"name": ..., "logits": {"<set>": {"<id>": [..]}}}
  static StoredLogitClassifier from_json(const nlohmann::json& doc);

 private:
  std::string name_ = "stored-logits";
  std::map<std::string, std::map<std::string, std::vector<double>>> logits_;
};

}  // namespace styleshift::evaluation
