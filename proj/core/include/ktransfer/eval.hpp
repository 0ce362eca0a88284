#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ktransfer/domain.hpp"
#include "ktransfer/transfer.hpp"

namespace ktransfer {

// Fraction of predictions with (p >= 0.5) == label. Throws MetricError when empty
// or when lengths differ.
double accuracy(std::span<const double> preds, std::span<const int> labels);
double accuracy(const std::vector<Prediction>& pairs);

// Rank-statistic AUC with ties counted one half. Throws MetricError when
// either class is missing.
double auc(std::span<const double> preds, std::span<const int> labels);
double auc(const std::vector<Prediction>& pairs);

struct MetricReport {
  std::string model;
  std::string course;
  std::size_t n_predictions = 0;
  double acc = 0.0;
  double auc = 0.0;
  std::vector<double> fold_acc;
  std::vector<double> fold_auc;
  double acc_variance = 0.0;
  double auc_variance = 0.0;
};

MetricReport evaluate(const std::string& model, const std::string& course, const std::vector<Prediction>& pairs);

// Student-level k-fold CV; the mean and population variance of per-fold metrics.
MetricReport cross_validate(const Dataset& dataset, const ModelSpec& spec, int k, std::uint64_t seed,
                            const TrainConfig& config = {});

struct NaiveTransferResult {
  std::vector<std::string> models;
  std::vector<std::string> targets;
  std::vector<std::vector<MetricReport>> cells;      // [model][target]
  std::vector<std::vector<AgnosticModel>> trained;   // filled when keep_models is set
};

// Each course in turn is the target; the agnostic model is trained on the others
// and evaluated on the whole target course.
NaiveTransferResult run_naive_transfer_experiment(const std::vector<Dataset>& courses,
                                                  const std::vector<ModelSpec>& specs,
                                                  const TrainConfig& config = {}, bool keep_models = false);

struct PairwiseResult {
  std::string model;
  std::vector<std::string> courses;
  std::vector<std::vector<MetricReport>> cells;  // [source][target]; diagonal is k-fold CV
};

PairwiseResult run_pairwise_experiment(const std::vector<Dataset>& courses, const ModelSpec& spec, int k,
                                       std::uint64_t seed, const TrainConfig& config = {});

struct CurvePoint {
  std::string model;
  std::string course;
  std::size_t pilot_size = 0;
  std::uint64_t seed = 0;
  int fold = 0;
  double acc = 0.0;
  double auc = 0.0;
};

struct CurveSummary {
  std::string model;
  std::string course;
  std::size_t pilot_size = 0;
  double acc = 0.0;
  double auc = 0.0;
  std::size_t runs = 0;
};

struct InductiveOptions {
  std::vector<std::size_t> pilot_sizes = {0, 5, 10, 25, 50, 100, 250, 500, 1000};
  std::vector<std::uint64_t> seeds = {0};
  int k = 5;
  int folds_per_seed = 1;  // test folds evaluated per seed, starting at fold 0
  double lambda = 5.0;
  std::vector<ModelSpec> conventional = conventional_presets();
  std::string scratch_spec = "A-AugLR+KC+quest";
  std::string scratch_name = "S-AugLR";
};

// Learning curves on `target`: I-AugLR tuned from `agnostic`, S-AugLR from scratch
// and each conventional preset trained on the same pilot; evaluated on held-out
// folds of the target. Pilots of one seed are nested across sizes.
std::vector<CurvePoint> run_inductive_experiment(const AgnosticModel& agnostic, const Dataset& target,
                                                 const InductiveOptions& opts, const TrainConfig& config = {});
// Overload that trains the agnostic model on every course except `target_index`.
std::vector<CurvePoint> run_inductive_experiment(const std::vector<Dataset>& courses, std::size_t target_index,
                                                 const ModelSpec& agnostic_spec, const InductiveOptions& opts,
                                                 const TrainConfig& config = {});

// Mean over seeds and folds per (model, course, pilot size), in first-seen order.
std::vector<CurveSummary> summarize_curve(const std::vector<CurvePoint>& points);

struct LambdaSearch {
  double best_lambda = 5.0;
  std::vector<std::pair<double, double>> auc_by_lambda;
};

std::vector<double> default_lambda_grid();
// Tunes on the train folds of the first split of `course`, scores AUC on its test fold.
LambdaSearch tune_lambda(const AgnosticModel& model, const Dataset& course, const std::vector<double>& grid, int k,
                         std::uint64_t seed, const TrainConfig& config = {});

}  // namespace ktransfer
