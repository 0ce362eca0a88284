#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"

namespace ktransfer::cli {

struct SimulateArgs {
  ExperimentConfig cfg;
};

struct TrainArgs {
  ExperimentConfig cfg;
  bool save_models = false;
};

struct ApplyArgs {
  ExperimentConfig cfg;
  std::filesystem::path model_file;  // pre-trained agnostic model
  bool save_models = false;
};

struct TuneArgs {
  ExperimentConfig cfg;
  std::filesystem::path model_file;
};

struct ReportArgs {
  std::filesystem::path in;
  std::filesystem::path out;
};

// Each returns the process exit code; errors propagate as exceptions.
int cmd_simulate(const SimulateArgs& a);
int cmd_validate(const ExperimentConfig& cfg);
int cmd_train(const TrainArgs& a);
int cmd_apply(const ApplyArgs& a);
int cmd_tune(const TuneArgs& a);
int cmd_report(const ReportArgs& a);

// File-name form of a model name: lower case, spaces removed.
std::string file_slug(const std::string& name);

}  // namespace ktransfer::cli
