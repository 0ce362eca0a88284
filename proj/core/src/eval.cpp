#include "ktransfer/eval.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <tuple>

#include "ktransfer/errors.hpp"
#include "ktransfer/ingest.hpp"
#include "ktransfer/random.hpp"

namespace ktransfer {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw MetricError("predictions and labels differ in length");
  if (a == 0) throw MetricError("no predictions to score");
}

std::pair<std::vector<double>, std::vector<int>> unzip(const std::vector<Prediction>& pairs) {
  std::vector<double> p;
  std::vector<int> y;
  p.reserve(pairs.size());
  y.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    p.push_back(a);
    y.push_back(b);
  }
  return {std::move(p), std::move(y)};
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

std::vector<const Dataset*> others(const std::vector<Dataset>& courses, std::size_t skip) {
  std::vector<const Dataset*> out;
  for (std::size_t i = 0; i < courses.size(); ++i)
    if (i != skip) out.push_back(&courses[i]);
  return out;
}

}  // namespace

double accuracy(std::span<const double> preds, std::span<const int> labels) {
  check_lengths(preds.size(), labels.size());
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += static_cast<std::size_t>((preds[i] >= 0.5 ? 1 : 0) == labels[i]);
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

double accuracy(const std::vector<Prediction>& pairs) {
  auto [p, y] = unzip(pairs);
  return accuracy(p, y);
}

double auc(std::span<const double> preds, std::span<const int> labels) {
  check_lengths(preds.size(), labels.size());
  const std::size_t n = preds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return preds[a] < preds[b]; });
  // Sum of positive ranks, with tied groups sharing their average rank. Ranks
  // are doubled to keep the arithmetic in integers.
  std::uint64_t rank2_sum = 0, pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && preds[order[j]] == preds[order[i]]) ++j;
    const std::uint64_t avg2 = static_cast<std::uint64_t>(i + 1 + j);  // 2 * mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] == 1) {
        rank2_sum += avg2;
        ++pos;
      }
    i = j;
  }
  const std::uint64_t neg = n - pos;
  if (pos == 0 || neg == 0) throw MetricError("AUC is undefined when only one class is present");
  const std::uint64_t u2 = rank2_sum - pos * (pos + 1);  // 2 * Mann-Whitney U
  return static_cast<double>(u2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

double auc(const std::vector<Prediction>& pairs) {
  auto [p, y] = unzip(pairs);
  return auc(p, y);
}

MetricReport evaluate(const std::string& model, const std::string& course, const std::vector<Prediction>& pairs) {
  MetricReport r;
  r.model = model;
  r.course = course;
  r.n_predictions = pairs.size();
  r.acc = accuracy(pairs);
  r.auc = auc(pairs);
  r.fold_acc = {r.acc};
  r.fold_auc = {r.auc};
  return r;
}

MetricReport cross_validate(const Dataset& dataset, const ModelSpec& spec, int k, std::uint64_t seed,
                            const TrainConfig& config) {
  const FoldAssignment folds = split_by_student(dataset, k, seed);
  MetricReport r;
  r.model = spec.name;
  r.course = dataset.course_id();
  for (int f = 0; f < k; ++f) {
    const Dataset train_set = folds.train_folds(dataset, f);
    const Dataset test_set = folds.test_fold(dataset, f);
    std::vector<Prediction> preds;
    try {
      TrainConfig tc = config;
      tc.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(f)});
      preds = predict(train_model(train_set, spec, tc), test_set);
    } catch (const TrainingError& e) {
      throw TrainingError("fold " + std::to_string(f) + ": " + e.what());
    }
    r.n_predictions += preds.size();
    r.fold_acc.push_back(accuracy(preds));
    r.fold_auc.push_back(auc(preds));
  }
  r.acc = mean(r.fold_acc);
  r.auc = mean(r.fold_auc);
  r.acc_variance = variance(r.fold_acc);
  r.auc_variance = variance(r.fold_auc);
  return r;
}

NaiveTransferResult run_naive_transfer_experiment(const std::vector<Dataset>& courses,
                                                  const std::vector<ModelSpec>& specs, const TrainConfig& config,
                                                  bool keep_models) {
  if (courses.size() < 2) throw ConfigError("naive transfer needs at least two courses");
  NaiveTransferResult res;
  for (const auto& c : courses) res.targets.push_back(c.course_id());
  for (const auto& spec : specs) {
    res.models.push_back(spec.name);
    auto& row = res.cells.emplace_back();
    auto& kept = res.trained.emplace_back();
    for (std::size_t t = 0; t < courses.size(); ++t) {
      AgnosticModel m = train_agnostic(others(courses, t), spec, config);
      row.push_back(evaluate(spec.name, courses[t].course_id(), apply_agnostic(m, courses[t])));
      if (keep_models) kept.push_back(std::move(m));
    }
  }
  return res;
}

PairwiseResult run_pairwise_experiment(const std::vector<Dataset>& courses, const ModelSpec& spec, int k,
                                       std::uint64_t seed, const TrainConfig& config) {
  if (courses.size() < 2) throw ConfigError("pairwise transfer needs at least two courses");
  PairwiseResult res;
  res.model = spec.name;
  for (const auto& c : courses) res.courses.push_back(c.course_id());
  for (std::size_t s = 0; s < courses.size(); ++s) {
    auto& row = res.cells.emplace_back();
    const AgnosticModel m = train_agnostic({&courses[s]}, spec, config);
    for (std::size_t t = 0; t < courses.size(); ++t) {
      if (s == t) row.push_back(cross_validate(courses[t], spec, k, seed, config));
      else row.push_back(evaluate(spec.name, courses[t].course_id(), apply_agnostic(m, courses[t])));
    }
  }
  return res;
}

std::vector<CurvePoint> run_inductive_experiment(const AgnosticModel& agnostic, const Dataset& target,
                                                 const InductiveOptions& opts, const TrainConfig& config) {
  if (opts.folds_per_seed < 1 || opts.folds_per_seed > opts.k) throw ConfigError("folds_per_seed must be in [1, k]");
  const ModelSpec scratch = find_preset(opts.scratch_spec);
  std::vector<CurvePoint> out;
  auto record = [&](const std::string& model, std::size_t n, std::uint64_t seed, int fold,
                    const std::vector<Prediction>& preds) {
    out.push_back({model, target.course_id(), n, seed, fold, accuracy(preds), auc(preds)});
  };
  for (std::uint64_t seed : opts.seeds) {
    const FoldAssignment folds = split_by_student(target, opts.k, seed);
    for (int f = 0; f < opts.folds_per_seed; ++f) {
      const Dataset train_set = folds.train_folds(target, f);
      const Dataset test_set = folds.test_fold(target, f);
      const std::uint64_t pilot_seed = derive_seed(seed, {0x9170, static_cast<std::uint64_t>(f)});
      for (std::size_t n : opts.pilot_sizes) {
        const Dataset pilot = sample_pilot_students(train_set, n, pilot_seed);
        TrainConfig tc = config;
        tc.seed = derive_seed(config.seed, {seed, static_cast<std::uint64_t>(f), n});
        const TargetModel tuned = tune_inductive(agnostic, pilot, opts.lambda, tc);
        record(tuned.spec.name, n, seed, f, predict(tuned, test_set));
        if (n == 0 || pilot.question_interaction_count() == 0) continue;
        TargetModel s = train_scratch(pilot, scratch, tc);
        record(opts.scratch_name, n, seed, f, predict(s, test_set));
        for (const auto& spec : opts.conventional) record(spec.name, n, seed, f, predict(train_model(pilot, spec, tc), test_set));
      }
    }
  }
  return out;
}

std::vector<CurvePoint> run_inductive_experiment(const std::vector<Dataset>& courses, std::size_t target_index,
                                                 const ModelSpec& agnostic_spec, const InductiveOptions& opts,
                                                 const TrainConfig& config) {
  if (target_index >= courses.size()) throw ConfigError("target index out of range");
  if (courses.size() < 2) throw ConfigError("inductive transfer needs at least one source course");
  const AgnosticModel m = train_agnostic(others(courses, target_index), agnostic_spec, config);
  return run_inductive_experiment(m, courses[target_index], opts, config);
}

std::vector<CurveSummary> summarize_curve(const std::vector<CurvePoint>& points) {
  std::vector<CurveSummary> out;
  std::map<std::tuple<std::string, std::string, std::size_t>, std::size_t> index;
  for (const auto& p : points) {
    auto key = std::make_tuple(p.model, p.course, p.pilot_size);
    auto [it, fresh] = index.try_emplace(key, out.size());
    if (fresh) out.push_back({p.model, p.course, p.pilot_size, 0.0, 0.0, 0});
    auto& s = out[it->second];
    s.acc += p.acc;
    s.auc += p.auc;
    ++s.runs;
  }
  for (auto& s : out) {
    s.acc /= static_cast<double>(s.runs);
    s.auc /= static_cast<double>(s.runs);
  }
  return out;
}

std::vector<double> default_lambda_grid() { return {0.01, 0.1, 1.0, 5.0, 10.0, 100.0}; }

LambdaSearch tune_lambda(const AgnosticModel& model, const Dataset& course, const std::vector<double>& grid, int k,
                         std::uint64_t seed, const TrainConfig& config) {
  if (grid.empty()) throw ConfigError("lambda grid is empty");
  const FoldAssignment folds = split_by_student(course, k, seed);
  const Dataset train_set = folds.train_folds(course, 0);
  const Dataset test_set = folds.test_fold(course, 0);
  LambdaSearch res;
  double best = -1.0;
  for (double lambda : grid) {
    const double a = auc(predict(tune_inductive(model, train_set, lambda, config), test_set));
    res.auc_by_lambda.emplace_back(lambda, a);
    if (a > best) {
      best = a;
      res.best_lambda = lambda;
    }
  }
  return res;
}

}  // namespace ktransfer
