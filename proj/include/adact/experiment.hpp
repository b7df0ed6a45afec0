#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "adact/activation.hpp"
#include "adact/datasets.hpp"
#include "adact/network.hpp"
#include "adact/optimizer.hpp"
#include "adact/training.hpp"

namespace adact {

inline constexpr int kConfigVersion = 1;

/// Where the samples come from. Synthetic sets use `n`; "cifar10" uses
/// `paths` (and optionally `test_paths`); "idx" uses the image/label files.
/// Relative paths are resolved against `root`.
struct DatasetConfig {
  std::string name;
  Index n = 0;
  std::vector<std::string> paths;
  std::vector<std::string> test_paths;
  std::string images, labels, test_images, test_labels;
  std::optional<Index> train, test;
  std::filesystem::path root;
};

struct ExperimentConfig {
  int version = kConfigVersion;
  std::string name;
  std::uint64_t seed = 0;
  DatasetConfig dataset;
  std::string preset;
  PresetOptions preset_options;
  ActivationKind activation;
  bool freeze = false;
  OptimizerConfig optimizer;             // schedule left empty unless given explicitly
  std::vector<double> rates = default_stage_rates();
  Index epochs = 0;
  Index batch_size = 64;
  std::vector<Index> tracked_layers;     // empty: first, middle, last
  Index tracked_weights = 4;
  std::string output;

  /// The explicit schedule, or equal stages of `rates` over `epochs`.
  std::vector<ScheduleStage> resolved_schedule() const;
  TrainConfig train_config() const;
  nlohmann::json to_json() const;
};

/// Parses the JSON config schema. Every problem found is reported at once
/// through ConfigError::issues(), each prefixed with its key path.
ExperimentConfig parse_config(const std::string& text);
/// parse_config on a file; relative dataset paths resolve against its directory.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Loads (or generates) the dataset and splits it into train/test.
std::pair<Dataset, Dataset> load_experiment_data(const ExperimentConfig& cfg);

struct ExperimentResult {
  std::vector<RunRecord> records;
  double final_accuracy = 0.0;
  double area = 0.0;
};

/// Trains and writes config.json, run.csv, deltas.csv, shapes.csv,
/// summary.txt and checkpoint.json into `out_dir`. CSV rows are flushed
/// per epoch; on divergence the partial files stay and TrainingError
/// propagates.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Column headers of the emitted files.
std::string run_csv_header(const Model& model);
std::string deltas_csv_header(Index tracked_weights);
inline constexpr const char* kShapesCsvHeader = "layer,z,fz";

std::string shapes_csv(const std::vector<ShapeTrace>& traces);

/// Shortest round-trip decimal form.
std::string format_number(double v);

struct CompareRow {
  std::string run;
  double area = 0.0;
  double final_accuracy = 0.0;
  Index epochs = 0;
};

enum class CompareMetric { Area, FinalAccuracy };
std::optional<CompareMetric> parse_compare_metric(const std::string& name);

/// Reads run.csv from every directory and ranks the runs: ascending area or
/// descending final accuracy, ties by run (directory) name.
std::vector<CompareRow> compare(const std::vector<std::filesystem::path>& run_dirs, CompareMetric metric);
std::string format_compare_table(const std::vector<CompareRow>& rows, CompareMetric metric);

/// The loss curve stored in a run.csv (epoch axis 1..E).
ConvergenceCurve read_loss_curve(const std::filesystem::path& run_csv);

}  // namespace adact
