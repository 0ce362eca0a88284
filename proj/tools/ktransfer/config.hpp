#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ktransfer/domain.hpp"
#include "ktransfer/features.hpp"
#include "ktransfer/linmodel.hpp"
#include "ktransfer/synth.hpp"
#include "ktransfer/transfer.hpp"

namespace ktransfer::cli {

struct DataSource {
  bool synthetic = false;
  SynthConfig synth;
  std::filesystem::path dir;               // registry.csv, prereqs.csv and log files
  std::vector<std::filesystem::path> logs; // explicit log files; default: every other *.csv in dir
  std::filesystem::path registry;
  std::filesystem::path prereqs;
  std::filesystem::path mapping;           // ColumnMapping JSON for foreign exports
  std::size_t min_responses = 10;
};

// One config file drives every subcommand; command-line flags are merged into
// the JSON document before it is resolved, so they override file values.
struct ExperimentConfig {
  DataSource data;
  nlohmann::json models = nlohmann::json::array();
  HyperParams hyper;
  TrainConfig train;
  std::string mode = "naive";  // naive, pairwise, inductive, cv-reference
  std::vector<std::size_t> pilot_sizes = {0, 5, 10, 25, 50, 100, 250, 500, 1000};
  std::vector<std::uint64_t> seeds = {0};
  int folds_per_seed = 1;
  int k = 5;
  double lambda = 5.0;
  std::uint64_t seed = 0;
  std::string target;  // course id or log file
  std::filesystem::path out;

  std::vector<ModelSpec> model_specs() const;
  nlohmann::json to_json() const;
};

nlohmann::json read_json_file(const std::filesystem::path& path);

// Defaults < file < overrides. The output directory falls back to
// $KTRANSFER_OUT and then ./ktransfer_out.
ExperimentConfig resolve_config(const nlohmann::json& file, const nlohmann::json& overrides);

SynthConfig synth_from_json(const nlohmann::json& j, SynthConfig base = {});
nlohmann::json synth_to_json(const SynthConfig& c);

// Courses in course-id order. Synthetic sources are generated from `seed`.
std::vector<Dataset> load_courses(const DataSource& src, std::uint64_t seed, bool apply_min_filter = true);

// Resolved hyperparameters, one per line, for the run log.
std::string describe(const ExperimentConfig& cfg);

}  // namespace ktransfer::cli
