#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ktransfer/features.hpp"
#include "ktransfer/sparse.hpp"

namespace ktransfer {

struct WeightVector {
  std::vector<double> values;
  std::uint64_t fingerprint = 0;  // FeatureSchema::fingerprint() of the training layout

  WeightVector() = default;
  WeightVector(std::vector<double> v, std::uint64_t fp) : values(std::move(v)), fingerprint(fp) {}
  static WeightVector zeros(const FeatureSchema& schema) { return {std::vector<double>(schema.dim(), 0.0), schema.fingerprint()}; }

  std::size_t dim() const { return values.size(); }
  bool operator==(const WeightVector&) const = default;
};

// Gaussian prior N(center, 1/lambda) expressed as the penalty lambda/2 * ||w - center||^2.
struct PriorSpec {
  WeightVector center;
  double lambda = 5.0;
};

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 512;  // 0 means full batch
  std::uint64_t seed = 0;

  void validate() const;
};

double sigmoid(double z);
double dot(const std::vector<double>& w, SparseView x);

// sigma(w.x), clamped to [1e-12, 1 - 1e-12].
double predict_proba(const WeightVector& w, SparseView x);

struct LossValue {
  double value = 0.0;
  bool undefined = false;  // no pairs and no prior
};

// Sum of per-pair negative log-likelihoods, plus lambda/2 ||w - center||^2 when a prior is given.
LossValue loss(const WeightVector& w, const Design& pairs, const PriorSpec* prior = nullptr);

// Gradient of loss(): sum (sigma(w.x) - y) x + lambda (w - center).
std::vector<double> gradient(const WeightVector& w, const Design& batch, const PriorSpec* prior = nullptr);

struct TrainReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::size_t steps = 0;
};

// Adam over seeded mini-batches. The prior gradient of each mini-batch is
// scaled by batch/N so one epoch of steps covers the full objective once.
WeightVector train(const Design& pairs, const FeatureSchema& schema, const TrainConfig& config,
                   const PriorSpec* prior = nullptr, const WeightVector* init = nullptr,
                   TrainReport* report = nullptr);

// A trained logistic model together with everything needed to rebuild its
// extraction pipeline.
struct LogisticModel {
  std::string name;
  FeatureSchema schema;
  WeightVector weights;
  double global_correct_rate = 0.5;
  TrainConfig train_config;
  double lambda = 0.0;
  std::vector<std::string> source_courses;

  FeatureExtractor extractor(const CourseMeta* course) const {
    return FeatureExtractor(schema, global_correct_rate, course);
  }
};

}  // namespace ktransfer
