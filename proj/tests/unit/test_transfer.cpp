#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "ktransfer/errors.hpp"
#include "ktransfer/ingest.hpp"
#include "ktransfer/transfer.hpp"

using namespace ktransfer;
using namespace kt_test;

namespace {

TrainConfig quick(int epochs = 5) {
  TrainConfig c;
  c.epochs = epochs;
  c.learning_rate = 0.01;
  return c;
}

const SyntheticSuite& suite() {
  static const SyntheticSuite s = generate_transfer_suite(small_synth(30), 21);
  return s;
}

std::vector<const Dataset*> sources_except(std::size_t target) {
  std::vector<const Dataset*> out;
  for (std::size_t i = 0; i < suite().datasets.size(); ++i)
    if (i != target) out.push_back(&suite().datasets[i]);
  return out;
}

std::vector<Family> families_of(const std::string& preset) { return find_preset(preset).config.families; }

bool contains(const std::vector<Family>& v, Family f) { return std::find(v.begin(), v.end(), f) != v.end(); }

// Renames every question id of a dataset with a prefix, consistently in meta and log.
Dataset retag_questions(const Dataset& d, const std::string& prefix) {
  CourseMeta m = d.meta();
  m.questions.clear();
  for (const auto& [q, info] : d.meta().questions) m.questions[prefix + q] = info;
  auto hs = d.histories();
  for (auto& h : hs)
    for (auto& x : h.interactions)
      if (x.question_id) x.question_id = prefix + *x.question_id;
  return Dataset(m, hs);
}

}  // namespace

TEST(Transfer, PresetFamilies) {
  const auto best = families_of("A-Best-LR+"), aug = families_of("A-AugLR");
  for (auto f : best) EXPECT_TRUE(contains(aug, f));
  for (auto f : {Family::lag_time, Family::response_time, Family::context_onehot, Family::context_counts,
                 Family::difficulty_onehot, Family::difficulty_counts})
    EXPECT_TRUE(contains(aug, f)) << family_name(f);
  EXPECT_EQ(aug.size(), best.size() + 6);

  const auto irt = families_of("IRT");
  EXPECT_EQ(irt, (std::vector<Family>{Family::student_onehot, Family::question_onehot}));
  for (const char* name : {"A-PFA", "A-DAS3H", "A-Best-LR", "A-Best-LR+", "A-AugLR"}) {
    EXPECT_TRUE(find_preset(name).agnostic);
    EXPECT_TRUE(find_preset(name).config.agnostic()) << name;
  }
  EXPECT_FALSE(find_preset("A-AugLR+KC+quest").config.agnostic());
  EXPECT_EQ(find_preset("a-auglr").name, "A-AugLR");
  EXPECT_THROW(find_preset("nope"), ConfigError);
  EXPECT_EQ(conventional_presets().size(), 7u);
}

TEST(Transfer, ModelSpecsFromJson) {
  const auto specs = model_specs_from_json_text(
      R"({"models": [{"name": "A-PFA"}, {"name": "mine", "class": "logistic", "families": ["bias", "total_counts"], "agnostic": true}]})");
  ASSERT_EQ(specs.size(), 2u);
  EXPECT_EQ(specs[0].config.families, families_of("A-PFA"));
  EXPECT_EQ(specs[1].config.families, (std::vector<Family>{Family::bias, Family::total_counts}));
  EXPECT_THROW(model_specs_from_json_text(R"({"models": [{"name": "x", "families": ["question_onehot"], "agnostic": true}]})"),
               ConfigError);
  EXPECT_THROW(model_specs_from_json_text("{"), ConfigError);

  const auto h = hyper_from_json_text(R"({"hyper": {"smoothing_eta": 7}})");
  EXPECT_EQ(h.smoothing_eta, 7.0);
  EXPECT_EQ(hyper_from_json_text("{\"hyper\": " + hyper_to_json_text(h) + "}"), h);
  TrainConfig tc;
  tc.epochs = 17;
  tc.batch_size = 64;
  const auto back = train_config_from_json_text("{\"train\": " + train_config_to_json_text(tc) + "}");
  EXPECT_EQ(back.epochs, 17);
  EXPECT_EQ(back.batch_size, 64u);
}

TEST(Transfer, TrainAgnosticRejectsCourseSpecific) {
  EXPECT_THROW(train_agnostic(sources_except(0), find_preset("Best-LR"), quick()), ConfigError);
  EXPECT_THROW(train_agnostic({}, find_preset("A-PFA"), quick()), ConfigError);
}

TEST(Transfer, OneSourceEqualsPlainTraining) {
  const auto& d = suite().datasets[0];
  const auto spec = find_preset("A-Best-LR");
  const auto a = train_agnostic({&d}, spec, quick());
  const auto b = train_model(d, spec, quick());
  EXPECT_EQ(a.logistic.weights, b.logistic.weights);
}

TEST(Transfer, NaiveApplyMatchesReplayAndHandlesUnseenIds) {
  const auto model = train_agnostic(sources_except(4), find_preset("A-AugLR"), quick());
  const auto& target = suite().datasets[4];
  const auto preds = apply_agnostic(model, target);
  EXPECT_EQ(preds.size(), target.question_interaction_count());

  // Replay with the extractor and predict_proba.
  const auto fx = model.logistic.extractor(&target.meta());
  std::size_t i = 0;
  for (const auto& h : target.histories())
    for (const auto& [x, y] : fx.extract_sequence(h)) {
      EXPECT_EQ(preds[i].first, predict_proba(model.logistic.weights, x));
      EXPECT_EQ(preds[i].second, y);
      ++i;
    }

  const Dataset empty(target.meta(), {});
  EXPECT_TRUE(apply_agnostic(model, empty).empty());

  auto x = question("s", target.course_id(), 5, "never-seen", {"no-such-kc"}, 1);
  const Dataset odd(target.meta(), {history("s", target.course_id(), {x})});
  const auto p = apply_agnostic(model, odd);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_GT(p[0].first, 0.0);
  EXPECT_LT(p[0].first, 1.0);
}

TEST(Transfer, RetaggingTargetLeavesPredictionsIdentical) {
  for (const char* name : {"A-AugLR", "A-BKT", "A-IRT", "A-DAS3H"}) {
    const auto model = train_agnostic(sources_except(2), find_preset(name), quick());
    const auto& target = suite().datasets[2];
    EXPECT_EQ(apply_agnostic(model, target), apply_agnostic(model, retag_questions(target, "zz_"))) << name;
  }
}

TEST(Transfer, EmbedPriorPadsWithZeros) {
  const auto model = train_agnostic(sources_except(0), find_preset("A-AugLR"), quick());
  const auto& target = suite().datasets[0];

  const auto same = embed_prior(model, model.logistic.schema);
  EXPECT_EQ(same.center.values, model.logistic.weights.values);
  EXPECT_EQ(same.lambda, 5.0);

  const auto schema = inductive_target_schema(model, target.meta());
  const auto q = target.meta().questions.size(), k = target.meta().kcs.size();
  EXPECT_EQ(schema.dim(), model.logistic.schema.dim() + q + 3 * k);
  const auto p = embed_prior(model, schema, 2.0);
  const std::size_t n = model.logistic.weights.dim();
  for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(p.center.values[j], model.logistic.weights.values[j]);
  for (std::size_t j = n; j < schema.dim(); ++j) EXPECT_EQ(p.center.values[j], 0.0);

  // A schema whose prefix differs is rejected.
  const auto other = build_schema(find_preset("A-PFA").config, nullptr, {});
  EXPECT_THROW(embed_prior(model, other), SchemaError);
}

TEST(Transfer, EmptyPilotEqualsNaiveTransfer) {
  const auto model = train_agnostic(sources_except(1), find_preset("A-AugLR"), quick());
  const auto& target = suite().datasets[1];
  const Dataset empty(target.meta(), {});
  const auto tuned = tune_inductive(model, empty);
  EXPECT_EQ(tuned.spec.name, "I-AugLR");
  EXPECT_EQ(predict(tuned, target), apply_agnostic(model, target));
  EXPECT_THROW(train_scratch(empty, find_preset("A-AugLR+KC+quest"), quick()), ConfigError);
}

TEST(Transfer, HugeLambdaPinsToPrior) {
  const auto model = train_agnostic(sources_except(1), find_preset("A-Best-LR+"), quick());
  const auto pilot = sample_pilot_students(suite().datasets[1], 5, 3);
  TrainConfig tc = quick(50);
  tc.learning_rate = 0.001;
  const auto tuned = tune_inductive(model, pilot, 1e6, tc);
  const auto prior = embed_prior(model, tuned.logistic.schema, 1e6);
  double worst = 0;
  for (std::size_t j = 0; j < prior.center.dim(); ++j)
    worst = std::max(worst, std::abs(tuned.logistic.weights.values[j] - prior.center.values[j]));
  EXPECT_LT(worst, 1e-2);
}

TEST(Transfer, ZeroLambdaEqualsScratchFromPrior) {
  const auto model = train_agnostic(sources_except(3), find_preset("A-AugLR"), quick());
  const auto pilot = sample_pilot_students(suite().datasets[3], 8, 1);
  const auto tuned = tune_inductive(model, pilot, 0.0, quick(10));
  const auto schema = inductive_target_schema(model, pilot.meta());
  const auto center = embed_prior(model, schema, 0.0).center;
  ScratchOptions opts;
  opts.schema = &schema;
  opts.init = &center;
  opts.global_correct_rate = model.global_correct_rate;
  const auto scratch = train_scratch(pilot, find_preset("A-AugLR+KC+quest"), quick(10), opts);
  EXPECT_EQ(tuned.logistic.weights.values, scratch.logistic.weights.values);
}

TEST(Transfer, ScratchPresetsTrainOnPilot) {
  const auto pilot = sample_pilot_students(suite().datasets[0], 10, 2);
  for (const auto& spec : conventional_presets()) {
    const auto m = train_scratch(pilot, spec, quick());
    const auto p = predict(m, suite().datasets[0]);
    EXPECT_EQ(p.size(), suite().datasets[0].question_interaction_count()) << spec.name;
  }
}

TEST(Transfer, OnlineIrt) {
  const double delta = 0.4;
  std::vector<Interaction> xs;
  for (int i = 0; i < 6; ++i) xs.push_back(question("s", "C", i, "Cq1", {"Ck1"}, i % 3 != 0, 0, 20));
  const Dataset d(tiny_meta(), {history("s", "C", xs)});
  const auto p = predict_online_airt(delta, d);
  ASSERT_EQ(p.size(), 6u);
  EXPECT_DOUBLE_EQ(p[0].first, sigmoid(-delta));
  double a = 0;
  for (int i = 0; i < 6; ++i) {
    EXPECT_DOUBLE_EQ(p[static_cast<std::size_t>(i)].first, sigmoid(a - delta));
    const double before = a;
    a += 0.1 * (p[static_cast<std::size_t>(i)].second - sigmoid(a - delta));
    if (p[static_cast<std::size_t>(i)].second) EXPECT_GT(a, before);
  }
  EXPECT_EQ(p, predict_online_airt(delta, d));
}
