#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "styleshift/corruptions.hpp"
#include "styleshift/datamodel.hpp"
#include "styleshift/evaluation.hpp"
#include "styleshift/frequency.hpp"
#include "styleshift/stylization.hpp"
#include "styleshift/training.hpp"

namespace styleshift::experiment {

// -- Desk dataset ----------------------------------------------------------

/// One 8x8 handwritten digit (intensities 0..16) from the UCI optical
/// digits collection.
struct DigitRecord {
  std::array<int, 64> cells{};
  int label = 0;
  int row = 0;
};

/// Reads comma-separated rows of 64 intensities followed by the label.
/// Gzip-compressed input is detected and decompressed transparently.
std::vector<DigitRecord> load_digits(const std::string& path);

enum class RenderStyle { photo, photo_ood, painting };

/// Renders a digit as a colour image. Photos carry class-correlated hues, a
/// cluttered background and sensor grain; out-of-distribution photos use
/// class-independent hues, brighter backgrounds and thinner strokes;
/// paintings use thick strokes, posterized uncorrelated colours and brush
/// texture.
Image render_digit(const DigitRecord& digit, RenderStyle style, int resolution, Rng& rng);

struct DeskDataOptions {
  int resolution = 32;
  std::uint64_t seed = 0;
  std::size_t photos = 900;
  std::size_t paintings = 300;
  std::size_t test = 300;
  std::size_t ood = 297;
};

struct DeskData {
  DomainDataset photos;
  DomainDataset paintings;
  DomainDataset test;
  DomainDataset ood;
};

DeskData make_desk_data(const std::vector<DigitRecord>& digits, const DeskDataOptions& options);

/// Default location of the bundled digits file.
std::string default_digits_path();

// -- Experiment configuration ----------------------------------------------

struct DataPaths {
  std::string photos;
  std::string paintings;
  std::string test;
  std::string ood;
};

struct SweepSpec {
  std::string axis;
  std::vector<std::string> values;
};

struct ExperimentConfig {
  DataPaths data;
  std::string output_dir = "runs";
  std::string scheme = "joint";
  stylization::StylePolicy style_policy;
  stylization::Stylizer stylizer;
  training::TrainingConfig training;
  frequency::LowPassSpec lowpass;
  bool lowpass_from_resolution = true;
  std::uint64_t corruption_seed = 0;
  std::vector<std::uint64_t> seeds = {0};
  std::size_t budget = 0;
  std::optional<SweepSpec> sweep;
  /// Directory used to resolve relative paths.
  std::filesystem::path base_dir;

  std::string resolve(const std::string& path) const;
};

/// Parses the document. `${STYLESHIFT_DATA_ROOT}` in paths is replaced by
/// the environment variable; relative paths resolve against `base_dir`.
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc,
                                             const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& config);

// -- Cells and sweeps ------------------------------------------------------

inline const std::vector<std::string> kSweepAxes = {
    "style_policy", "classifier_scheme", "painting_fraction", "lf_ablation",
    "combined_sources"};

/// Everything a single training run needs, fixed per sweep.
struct ExperimentData {
  DomainDataset photos;
  std::optional<DomainDataset> paintings;
  DomainDataset test;
  std::optional<DomainDataset> ood;
  std::vector<corruptions::CorruptedSet> corrupted;
};

ExperimentData load_experiment_data(const ExperimentConfig& config);

/// A fully specified training recipe.
///  sources: '+'-joined tokens from photos, paintings, stylized, with an
///  optional "_lf" suffix meaning low-pass filtered.
struct CellSpec {
  std::string label;
  std::string scheme = "joint";
  std::string sources = "photos";
  stylization::StylePolicy policy;
  std::optional<double> painting_fraction;
};

/// Translates one sweep-axis value into a cell.
CellSpec cell_for_axis(const ExperimentConfig& config, const std::string& axis,
                       const std::string& value);

struct CellResult {
  evaluation::EvalReport report;
  training::TrainingLog log;
  std::uint64_t model_hash = 0;
  std::size_t training_size = 0;
};

CellResult run_cell(const ExperimentConfig& config, const ExperimentData& data,
                    const CellSpec& cell, std::uint64_t seed);

struct SweepRow {
  std::string value;
  std::size_t runs = 0;
  std::optional<evaluation::RunAggregate> aggregate;
  std::vector<evaluation::EvalReport> reports;
  std::vector<std::string> failures;
};

struct SweepResult {
  std::string axis;
  std::vector<SweepRow> rows;
  std::string summary_hash;
};

/// Runs every axis value x seed, writing per-run reports, summary.csv and
/// summary.json under the configured output directory. Failed cells are
/// recorded and skipped.
SweepResult run_sweep(const ExperimentConfig& config, const SweepSpec& sweep);

std::string summary_csv(const SweepResult& result);
nlohmann::json summary_json(const SweepResult& result);

}  // namespace styleshift::experiment
