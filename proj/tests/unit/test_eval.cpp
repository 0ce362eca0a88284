#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "ktransfer/errors.hpp"
#include "ktransfer/eval.hpp"
#include "ktransfer/ingest.hpp"
#include "ktransfer/random.hpp"

using namespace ktransfer;
using namespace kt_test;

namespace {

double auc_pairwise(const std::vector<double>& p, const std::vector<int>& y) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        den += 1;
        num += p[i] > p[j] ? 1.0 : p[i] == p[j] ? 0.5 : 0.0;
      }
  return num / den;
}

TrainConfig quick() {
  TrainConfig c;
  c.epochs = 5;
  c.learning_rate = 0.01;
  return c;
}

const SyntheticSuite& suite() {
  static const SyntheticSuite s = generate_transfer_suite(small_synth(40), 31);
  return s;
}

}  // namespace

TEST(Eval, AccuracyExamples) {
  std::vector<double> ones(10000, 1.0);
  std::vector<int> labels(10000, 0);
  for (int i = 0; i < 7130; ++i) labels[static_cast<std::size_t>(i)] = 1;
  EXPECT_NEAR(accuracy(ones, labels), 0.7130, 1e-12);

  const std::vector<double> p = {0.9, 0.2, 0.7};
  const std::vector<int> y = {1, 0, 1};
  EXPECT_EQ(accuracy(p, y), 1.0);
  EXPECT_EQ(accuracy(std::vector<double>{0.5}, std::vector<int>{1}), 1.0);
  EXPECT_THROW(accuracy(std::vector<double>{}, std::vector<int>{}), MetricError);
  EXPECT_THROW(accuracy(std::vector<double>{0.1}, std::vector<int>{}), MetricError);
}

TEST(Eval, AucExamples) {
  EXPECT_EQ(auc(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}), 1.0);
  EXPECT_EQ(auc(std::vector<double>{0.4, 0.4, 0.4}, std::vector<int>{1, 0, 1}), 0.5);
  EXPECT_EQ(auc(std::vector<double>{0.8, 0.7, 0.3}, std::vector<int>{1, 0, 1}), 0.5);
  EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), MetricError);
}

TEST(Eval, AucMatchesPairwiseOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + rng.below(trial < 55 ? 300 : 2000);
    std::vector<double> p(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse values produce plenty of ties.
      p[i] = trial % 2 ? std::round(rng.uniform() * 10) / 10 : rng.uniform();
      y[i] = rng.bernoulli(0.6);
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_NEAR(auc(p, y), auc_pairwise(p, y), 1e-12) << "n=" << n;
  }
}

TEST(Eval, MetricsInvariantUnderMonotoneTransforms) {
  Rng rng(2);
  std::vector<double> p(500), q(500), r(500);
  std::vector<int> y(500);
  for (std::size_t i = 0; i < 500; ++i) {
    p[i] = rng.uniform();
    y[i] = rng.bernoulli(p[i]);
    q[i] = std::exp(3 * p[i]) - 7;                 // strictly increasing
    r[i] = 0.5 + 0.3 * std::tanh(4 * (p[i] - 0.5));  // keeps the 0.5 threshold
  }
  EXPECT_DOUBLE_EQ(auc(p, y), auc(q, y));
  EXPECT_DOUBLE_EQ(auc(p, y), auc(r, y));
  EXPECT_DOUBLE_EQ(accuracy(p, y), accuracy(r, y));
}

TEST(Eval, CrossValidateDeterministicAndAggregates) {
  const auto& d = suite().datasets[0];
  const auto spec = find_preset("A-PFA");
  const auto a = cross_validate(d, spec, 5, 3, quick());
  const auto b = cross_validate(d, spec, 5, 3, quick());
  EXPECT_EQ(a.fold_auc, b.fold_auc);
  EXPECT_EQ(a.fold_acc, b.fold_acc);
  ASSERT_EQ(a.fold_auc.size(), 5u);
  const double m = std::accumulate(a.fold_auc.begin(), a.fold_auc.end(), 0.0) / 5;
  EXPECT_NEAR(a.auc, m, 1e-12);
  EXPECT_NEAR(a.acc, std::accumulate(a.fold_acc.begin(), a.fold_acc.end(), 0.0) / 5, 1e-12);
  EXPECT_EQ(a.n_predictions, d.question_interaction_count());
  EXPECT_GE(a.auc_variance, 0.0);

  const auto folds = split_by_student(d, 5, 3);
  for (auto n : folds.fold_sizes()) EXPECT_EQ(n, d.student_count() / 5);
}

TEST(Eval, AlwaysCorrectBaseline) {
  const auto& d = suite().datasets[1];
  const auto r = cross_validate(d, find_preset("Always-correct"), 5, 0, quick());
  const auto folds = split_by_student(d, 5, 0);
  double prior_mean = 0;
  for (int f = 0; f < 5; ++f) {
    const auto t = folds.test_fold(d, f);
    double c = 0, n = 0;
    for (const auto& h : t.histories())
      for (const auto& x : h.interactions)
        if (x.is_question()) {
          ++n;
          c += *x.correct;
        }
    EXPECT_DOUBLE_EQ(r.fold_acc[static_cast<std::size_t>(f)], c / n);
    prior_mean += c / n / 5;
  }
  EXPECT_NEAR(r.acc, prior_mean, 1e-12);
  EXPECT_EQ(r.auc, 0.5);
}

TEST(Eval, NaiveTransferShape) {
  std::vector<Dataset> two(suite().datasets.begin(), suite().datasets.begin() + 2);
  const auto r2 = run_naive_transfer_experiment(two, {find_preset("A-PFA")}, quick());
  ASSERT_EQ(r2.cells.size(), 1u);
  EXPECT_EQ(r2.cells[0].size(), 2u);
  EXPECT_EQ(r2.targets, (std::vector<std::string>{two[0].course_id(), two[1].course_id()}));

  const auto r5 = run_naive_transfer_experiment(suite().datasets, {find_preset("A-PFA"), find_preset("A-BKT")},
                                                quick(), true);
  EXPECT_EQ(r5.cells.size(), 2u);
  for (const auto& row : r5.cells) EXPECT_EQ(row.size(), 5u);
  EXPECT_EQ(r5.trained[0].size(), 5u);
  // Each cell scores the agnostic model trained on the other four courses.
  const auto expect = evaluate("A-PFA", suite().datasets[3].course_id(),
                               apply_agnostic(r5.trained[0][3], suite().datasets[3]));
  EXPECT_EQ(r5.cells[0][3].auc, expect.auc);
  EXPECT_EQ(r5.trained[0][3].source_courses.size(), 4u);

  std::vector<Dataset> one(suite().datasets.begin(), suite().datasets.begin() + 1);
  EXPECT_THROW(run_naive_transfer_experiment(one, {find_preset("A-PFA")}), ConfigError);
}

TEST(Eval, PairwiseShape) {
  std::vector<Dataset> three(suite().datasets.begin(), suite().datasets.begin() + 3);
  const auto r = run_pairwise_experiment(three, find_preset("A-PFA"), 3, 0, quick());
  ASSERT_EQ(r.cells.size(), 3u);
  for (std::size_t s = 0; s < 3; ++s) {
    ASSERT_EQ(r.cells[s].size(), 3u);
    EXPECT_EQ(r.cells[s][s].fold_auc.size(), 3u);
    const auto& off = r.cells[s][(s + 1) % 3];
    EXPECT_EQ(off.fold_auc.size(), 1u);
    EXPECT_EQ(off.n_predictions, three[(s + 1) % 3].question_interaction_count());
  }
}

TEST(Eval, InductiveCurve) {
  const auto& courses = suite().datasets;
  InductiveOptions opts;
  opts.pilot_sizes = {0, 5, 10};
  opts.seeds = {0, 1};
  opts.conventional = {find_preset("PFA"), find_preset("BKT")};
  const auto pts = run_inductive_experiment(courses, 2, find_preset("A-AugLR"), opts, quick());
  const auto summary = summarize_curve(pts);
  std::map<std::string, std::set<std::size_t>> sizes;
  for (const auto& s : summary) {
    sizes[s.model].insert(s.pilot_size);
    EXPECT_EQ(s.runs, 2u);
  }
  EXPECT_EQ(sizes["I-AugLR"], (std::set<std::size_t>{0, 5, 10}));
  EXPECT_EQ(sizes["S-AugLR"], (std::set<std::size_t>{5, 10}));
  EXPECT_EQ(sizes["PFA"], (std::set<std::size_t>{5, 10}));
  EXPECT_EQ(sizes["BKT"], (std::set<std::size_t>{5, 10}));
  const auto again = run_inductive_experiment(courses, 2, find_preset("A-AugLR"), opts, quick());
  ASSERT_EQ(again.size(), pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_EQ(again[i].model, pts[i].model);
    EXPECT_EQ(again[i].auc, pts[i].auc);
    EXPECT_EQ(again[i].acc, pts[i].acc);
  }

  // Size 0 scores the naive model on the same held-out fold.
  std::vector<const Dataset*> src;
  for (std::size_t i = 0; i < courses.size(); ++i)
    if (i != 2) src.push_back(&courses[i]);
  const auto naive = train_agnostic(src, find_preset("A-AugLR"), quick());
  const auto test = split_by_student(courses[2], opts.k, 0).test_fold(courses[2], 0);
  const double naive_auc = auc(apply_agnostic(naive, test));
  for (const auto& p : pts)
    if (p.model == "I-AugLR" && p.pilot_size == 0 && p.seed == 0) EXPECT_DOUBLE_EQ(p.auc, naive_auc);

  opts.folds_per_seed = 0;
  EXPECT_THROW(run_inductive_experiment(courses, 2, find_preset("A-AugLR"), opts, quick()), ConfigError);
}

TEST(Eval, LambdaTuner) {
  const auto& d = suite().datasets[0];
  std::vector<const Dataset*> src = {&suite().datasets[1], &suite().datasets[2]};
  const auto model = train_agnostic(src, find_preset("A-Best-LR"), quick());
  const auto grid = default_lambda_grid();
  EXPECT_EQ(grid.front(), 0.01);
  EXPECT_EQ(grid.back(), 100.0);
  const auto r = tune_lambda(model, d, {0.1, 5.0}, 5, 0, quick());
  ASSERT_EQ(r.auc_by_lambda.size(), 2u);
  const auto best = std::max_element(r.auc_by_lambda.begin(), r.auc_by_lambda.end(),
                                     [](auto& a, auto& b) { return a.second < b.second; });
  EXPECT_EQ(r.best_lambda, best->first);
}
