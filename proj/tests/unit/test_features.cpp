#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "ktransfer/errors.hpp"
#include "ktransfer/features.hpp"
#include "ktransfer/random.hpp"
#include "ktransfer/transfer.hpp"

using namespace ktransfer;
using namespace kt_test;

namespace {

std::vector<std::string> keys_of(const Dataset& d) {
  std::vector<std::string> k;
  for (const auto& h : d.histories()) k.push_back(student_key(d.course_id(), h.student_id));
  return k;
}

FeatureSchema schema_for(const std::vector<Family>& fams, const Dataset& d) {
  return build_schema(ExtractorConfig(fams), &d.meta(), keys_of(d));
}

// Independent oracle: recomputes selected families by scanning the raw prefix.
std::map<std::size_t, double> oracle_features(const FeatureSchema& schema, const CourseMeta& meta,
                                              const StudentHistory& h, std::size_t t, double p_bar) {
  const auto& hyper = schema.hyper();
  const Interaction& next = h.interactions[t];
  std::map<std::size_t, double> v;
  auto add = [&](std::size_t i, double x) {
    if (x != 0.0) v[i] += x;
  };
  auto count_kc = [&](const std::string& k, bool want_correct) {
    double n = 0;
    for (std::size_t i = 0; i < t; ++i) {
      const auto& x = h.interactions[i];
      if (!x.is_question()) continue;
      if (std::find(x.kc_ids.begin(), x.kc_ids.end(), k) == x.kc_ids.end()) continue;
      if ((*x.correct == 1) == want_correct) ++n;
    }
    return n;
  };
  double c = 0, f = 0, videos = 0, readings = 0;
  std::vector<int> outcomes;
  std::array<std::array<double, 2>, kDifficultyBuckets> diff{};
  std::array<std::array<double, 2>, kContextCount> ctx{};
  for (std::size_t i = 0; i < t; ++i) {
    const auto& x = h.interactions[i];
    if (x.activity == Activity::video) ++videos;
    if (x.activity == Activity::reading) ++readings;
    if (!x.is_question()) continue;
    const bool ok = *x.correct == 1;
    (ok ? c : f) += 1;
    outcomes.push_back(ok);
    const int r = std::clamp(static_cast<int>(std::lround(*x.difficulty_rating / 10.0)) * 10, 10, 90);
    diff[static_cast<std::size_t>(r / 10 - 1)][ok ? 0 : 1] += 1;
    ctx[x.context][ok ? 0 : 1] += 1;
  }
  for (const auto& b : schema.blocks()) {
    const auto o = b.offset;
    switch (b.family) {
      case Family::bias: add(o, 1); break;
      case Family::total_counts:
        add(o, std::log(1 + c));
        add(o + 1, std::log(1 + f));
        break;
      case Family::kc_counts_shared:
        for (const auto& k : next.kc_ids) {
          add(o, std::log(1 + count_kc(k, true)));
          add(o + 1, std::log(1 + count_kc(k, false)));
        }
        break;
      case Family::smoothed_correctness:
        add(o, (c + hyper.smoothing_eta * p_bar) / (c + f + hyper.smoothing_eta));
        break;
      case Family::response_pattern:
        for (int pos = 0; pos < hyper.pattern_length && pos < static_cast<int>(outcomes.size()); ++pos) {
          const int y = outcomes[outcomes.size() - 1 - static_cast<std::size_t>(pos)];
          add(o + 2 * static_cast<std::size_t>(pos) + (y ? 0 : 1), 1);
        }
        break;
      case Family::video_counts: add(o, std::log(1 + videos)); break;
      case Family::reading_counts: add(o, std::log(1 + readings)); break;
      case Family::context_onehot: add(o + next.context, 1); break;
      case Family::context_counts:
        for (std::size_t k = 0; k < kContextCount; ++k) {
          add(o + 2 * k, std::log(1 + ctx[k][0]));
          add(o + 2 * k + 1, std::log(1 + ctx[k][1]));
        }
        break;
      case Family::difficulty_counts:
        for (std::size_t k = 0; k < kDifficultyBuckets; ++k) {
          add(o + 2 * k, std::log(1 + diff[k][0]));
          add(o + 2 * k + 1, std::log(1 + diff[k][1]));
        }
        break;
      case Family::prereq_counts:
      case Family::postreq_counts: {
        std::set<std::string> rel;
        for (const auto& k : next.kc_ids)
          for (const auto& [from, to] : meta.kc_prereq_edges) {
            if (b.family == Family::prereq_counts && to == k) rel.insert(from);
            if (b.family == Family::postreq_counts && from == k) rel.insert(to);
          }
        double rc = 0, rf = 0;
        for (const auto& k : rel) {
          rc += count_kc(k, true);
          rf += count_kc(k, false);
        }
        add(o, std::log(1 + rc));
        add(o + 1, std::log(1 + rf));
        break;
      }
      case Family::kc_counts:
        for (const auto& k : next.kc_ids) {
          const auto i = *schema.lookup(Family::kc_counts, k);
          add(o + 2 * i, std::log(1 + count_kc(k, true)));
          add(o + 2 * i + 1, std::log(1 + count_kc(k, false)));
        }
        break;
      case Family::question_onehot: add(o + *schema.lookup(Family::question_onehot, *next.question_id), 1); break;
      case Family::kc_onehot:
        for (const auto& k : next.kc_ids) add(o + *schema.lookup(Family::kc_onehot, k), 1);
        break;
      default: ADD_FAILURE() << "oracle does not cover " << family_name(b.family);
    }
  }
  return v;
}

}  // namespace

TEST(Features, Phi) {
  EXPECT_EQ(phi(0), 0.0);
  EXPECT_NEAR(phi(1), 0.6931, 1e-4);
  EXPECT_NEAR(phi(std::exp(1.0) - 1), 1.0, 1e-9);
  EXPECT_THROW(phi(-0.5), std::domain_error);
  for (double x = 0; x < 50; x += 0.5) EXPECT_LT(phi(x), phi(x + 0.5));
}

TEST(Features, SchemaDimensions) {
  const auto d = tiny_dataset();
  EXPECT_EQ(schema_for({Family::bias, Family::total_counts}, d).dim(), 3u);
  const auto a = build_schema(find_preset("A-Best-LR").config, nullptr, keys_of(d));
  EXPECT_EQ(a.dim(), 5u + d.student_count());
  const std::size_t S = d.student_count(), Q = d.meta().questions.size(), K = d.meta().kcs.size();
  EXPECT_EQ(build_schema(find_preset("Best-LR").config, &d.meta(), keys_of(d)).dim(), S + Q + K + 2 * K + 3);
  EXPECT_THROW(ExtractorConfig::from_names({"bias", "nonsense"}), ConfigError);
}

TEST(Features, SchemaBlocksContiguous) {
  const auto d = tiny_dataset();
  const auto s = build_schema(find_preset("AugLR").config, &d.meta(), keys_of(d));
  std::size_t off = 0;
  for (const auto& b : s.blocks()) {
    EXPECT_EQ(b.offset, off);
    off += b.size;
  }
  EXPECT_EQ(off, s.dim());
}

TEST(Features, AgnosticLayoutIdenticalAcrossCourses) {
  const auto a = tiny_dataset("A"), b = tiny_dataset("B");
  for (const char* name : {"A-PFA", "A-DAS3H", "A-Best-LR+", "A-AugLR"}) {
    const auto cfg = find_preset(name).config;
    auto sa = build_schema(cfg, &a.meta(), {});
    auto sb = build_schema(cfg, &b.meta(), {});
    EXPECT_EQ(sa, sb) << name;
    EXPECT_EQ(sa.fingerprint(), sb.fingerprint());
    EXPECT_TRUE(sa.agnostic_only());
  }
}

TEST(Features, UpdateStateRouting) {
  auto st = update_state(RollingState{}, question("s", "C", 1, "Cq1", {"Ck1"}, 1));
  EXPECT_EQ(st.correct, 1u);
  EXPECT_EQ(st.incorrect, 0u);
  EXPECT_EQ(st.trace("Ck1")->correct, 1u);

  auto v = update_state(RollingState{}, material("s", "C", 1, Activity::video));
  EXPECT_EQ(v.correct + v.incorrect, 0u);
  EXPECT_EQ(v.videos, 1u);
  EXPECT_TRUE(v.kc.empty());

  RollingState s;
  int outcomes[] = {1, 0, 1, 1, 0};
  for (int i = 0; i < 5; ++i) s.update(question("s", "C", i, "Cq1", {"Ck1"}, outcomes[i]));
  EXPECT_EQ(s.trace("Ck1")->correct, 3u);
  EXPECT_EQ(s.trace("Ck1")->incorrect, 2u);

  EXPECT_THROW(s.update(question("s", "C", 2, "Cq1", {"Ck1"}, 1)), SequencingError);
}

TEST(Features, ExtractSpecExamples) {
  const auto d = tiny_dataset();
  const auto schema = build_schema(find_preset("A-Best-LR").config, nullptr, keys_of(d));
  FeatureExtractor fx(schema, 0.6);
  const auto next = question("s1", "C", 10, "Cq1", {"Ck1"}, 1);

  // Fresh, known student: bias and the student's one-hot only.
  auto v = fx.extract(fx.fresh_state(), next, student_key("C", "s1"));
  EXPECT_EQ(v.nnz(), 2u);
  EXPECT_EQ(v.at(static_cast<std::uint32_t>(schema.block(Family::bias)->offset)), 1.0);
  // Unseen student: no student entry.
  EXPECT_EQ(fx.extract(fx.fresh_state(), next, student_key("C", "new")).nnz(), 1u);

  RollingState st;
  int outcomes[] = {1, 1, 0, 1};
  for (int i = 0; i < 4; ++i) st.update(question("s1", "C", i, "Cq3", {"Ck2"}, outcomes[i]));
  v = fx.extract(st, next, "x");
  const auto o = schema.block(Family::total_counts)->offset;
  EXPECT_NEAR(v.at(static_cast<std::uint32_t>(o)), 1.3863, 1e-4);
  EXPECT_NEAR(v.at(static_cast<std::uint32_t>(o + 1)), 0.6931, 1e-4);

  const auto s2 = build_schema(ExtractorConfig({Family::smoothed_correctness}), nullptr, {});
  EXPECT_NEAR(FeatureExtractor(s2, 0.6).extract(st, next, "x").at(0), 0.6667, 1e-4);
}

TEST(Features, ExtractSequenceBasics) {
  const auto meta = tiny_meta();
  const auto schema = build_schema(ExtractorConfig({Family::bias, Family::total_counts, Family::video_counts}),
                                   nullptr, {});
  FeatureExtractor fx(schema, 0.5);
  auto one = fx.extract_sequence(history("s", "C", {question("s", "C", 1, "Cq1", {"Ck1"}, 1)}));
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].first.nnz(), 1u);
  EXPECT_EQ(one[0].second, 1);

  auto vq = fx.extract_sequence(
      history("s", "C", {material("s", "C", 1, Activity::video), question("s", "C", 2, "Cq1", {"Ck1"}, 0)}));
  ASSERT_EQ(vq.size(), 1u);
  EXPECT_NEAR(vq[0].first.at(static_cast<std::uint32_t>(schema.block(Family::video_counts)->offset)), phi(1), 1e-15);
  EXPECT_EQ(vq[0].first.at(static_cast<std::uint32_t>(schema.block(Family::total_counts)->offset)), 0.0);
}

TEST(Features, IncrementalMatchesReplayAndOracle) {
  const auto suite = generate_transfer_suite(small_synth(12), 11);
  const auto& d = suite.datasets[0];
  std::vector<Family> fams = {Family::bias,           Family::total_counts,    Family::kc_counts_shared,
                              Family::smoothed_correctness, Family::response_pattern, Family::video_counts,
                              Family::reading_counts, Family::context_onehot,  Family::context_counts,
                              Family::difficulty_counts, Family::prereq_counts, Family::postreq_counts,
                              Family::kc_counts,      Family::question_onehot, Family::kc_onehot};
  const auto schema = schema_for(fams, d);
  FeatureExtractor fx(schema, 0.65, &d.meta());
  std::size_t checked = 0;
  for (const auto& h : d.histories()) {
    const auto pairs = fx.extract_sequence(h);
    std::size_t qi = 0;
    RollingState st = fx.fresh_state();
    for (std::size_t t = 0; t < h.interactions.size(); ++t) {
      const auto& x = h.interactions[t];
      if (x.is_question()) {
        // Replay from scratch with update_state.
        RollingState replay = fx.fresh_state();
        for (std::size_t i = 0; i < t; ++i) replay = update_state(replay, h.interactions[i]);
        EXPECT_EQ(replay, st);
        const auto& got = pairs[qi++].first;
        EXPECT_EQ(got, fx.extract(replay, x, student_key(h.course_id, h.student_id)));
        const auto want = oracle_features(schema, d.meta(), h, t, 0.65);
        ASSERT_EQ(got.nnz(), want.size());
        std::size_t k = 0;
        for (const auto& [i, val] : want) {
          EXPECT_EQ(got.index[k], i);
          EXPECT_NEAR(got.value[k], val, 1e-12);
          ++k;
        }
        ++checked;
      }
      st.update(x);
    }
    EXPECT_EQ(qi, pairs.size());
  }
  EXPECT_GT(checked, 100u);
}

TEST(Features, PrefixCausality) {
  const auto suite = generate_transfer_suite(small_synth(6), 3);
  const auto& d = suite.datasets[1];
  const auto schema = build_schema(find_preset("AugLR").config, &d.meta(), keys_of(d));
  FeatureExtractor fx(schema, 0.6, &d.meta());
  for (const auto& h : d.histories()) {
    const auto full = fx.extract_sequence(h);
    for (std::size_t cut = 1; cut < h.interactions.size(); cut += 7) {
      StudentHistory trunc = h;
      trunc.interactions.resize(cut);
      // Scramble everything after the cut in a second copy: outcomes flip.
      StudentHistory altered = h;
      for (std::size_t i = cut; i < altered.interactions.size(); ++i)
        if (altered.interactions[i].correct) altered.interactions[i].correct = 1 - *altered.interactions[i].correct;
      const auto a = fx.extract_sequence(trunc);
      const auto b = fx.extract_sequence(altered);
      for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].first, full[i].first);
        EXPECT_EQ(b[i].first, full[i].first);
      }
    }
  }
}

TEST(Features, OneHotFamiliesEmitOneEntry) {
  const auto d = tiny_dataset();
  const auto schema = schema_for({Family::student_onehot, Family::question_onehot, Family::context_onehot,
                                  Family::difficulty_onehot},
                                 d);
  FeatureExtractor fx(schema, 0.5, &d.meta());
  const auto x = question("s1", "C", 1, "Cq2", {"Ck1"}, 1, 0, 50, 2);
  const auto v = fx.extract(fx.fresh_state(), x, student_key("C", "s1"));
  EXPECT_EQ(v.nnz(), 4u);
  auto unknown = x;
  unknown.question_id = "Cq999";
  EXPECT_EQ(fx.extract(fx.fresh_state(), unknown, student_key("C", "zz")).nnz(), 2u);
}

TEST(Features, TimeWindowCounts) {
  const std::vector<double> w = {3600, 86400, std::numeric_limits<double>::infinity()};
  auto none = time_window_counts({}, {}, 100, w);
  for (auto [a, b] : none) EXPECT_EQ(a + b, 0.0);

  const std::vector<std::int64_t> t = {0};
  const std::vector<std::uint8_t> y = {1};
  auto r = time_window_counts(t, y, 7200, w);
  EXPECT_EQ(r[0], std::make_pair(0.0, 0.0));
  EXPECT_EQ(r[1], std::make_pair(phi(1), phi(1)));
  EXPECT_EQ(r[2], std::make_pair(phi(1), phi(1)));

  Rng rng(5);
  const HyperParams h;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::int64_t> times;
    std::vector<std::uint8_t> outs;
    std::int64_t now = 0;
    const int n = static_cast<int>(rng.below(30));
    for (int i = 0; i < n; ++i) {
      now += static_cast<std::int64_t>(rng.below(5 * 86400));
      times.push_back(now);
      outs.push_back(rng.bernoulli(0.6));
    }
    now += static_cast<std::int64_t>(rng.below(40 * 86400));
    auto got = time_window_counts(times, outs, now, h.windows_s);
    double prev_a = 0, prev_b = 0;
    for (std::size_t k = 0; k < h.windows_s.size(); ++k) {
      int a = 0, b = 0;
      for (std::size_t e = 0; e < times.size(); ++e)
        if (static_cast<double>(now - times[e]) <= h.windows_s[k]) {
          ++a;
          b += outs[e];
        }
      EXPECT_EQ(got[k].first, phi(a));
      EXPECT_EQ(got[k].second, phi(b));
      EXPECT_GE(got[k].first, prev_a);
      EXPECT_GE(got[k].second, prev_b);
      prev_a = got[k].first;
      prev_b = got[k].second;
    }
  }
}

TEST(Features, RpfaExamples) {
  auto e = rpfa_features({}, 0.8, 0.8, 3);
  EXPECT_EQ(e.failures, 0.0);
  EXPECT_EQ(e.recency, 0.0);

  const std::vector<std::uint8_t> one = {1};
  // 1 / (1 + 0.8 + 0.64 + 0.512) = 0.338753...
  EXPECT_NEAR(rpfa_features(one, 0.8, 0.8, 3).recency, 1.0 / 2.952, 1e-12);
  EXPECT_NEAR(rpfa_features(one, 0.8, 0.8, 3).recency, 0.33875, 1e-4);

  const std::vector<std::uint8_t> two_fail = {0, 0};
  EXPECT_NEAR(rpfa_features(two_fail, 0.8, 0.8, 3).failures, 1.8, 1e-12);

  // Brute-force weighted mean with explicit ghost list.
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::uint8_t> outs;
    const int n = static_cast<int>(rng.below(15));
    for (int i = 0; i < n; ++i) outs.push_back(rng.bernoulli(0.5));
    std::vector<std::uint8_t> padded(3, 0);
    padded.insert(padded.end(), outs.begin(), outs.end());
    double num = 0, den = 0, fail = 0;
    for (std::size_t i = 0; i < padded.size(); ++i) {
      const double age = static_cast<double>(padded.size() - 1 - i);
      num += std::pow(0.7, age) * padded[i];
      den += std::pow(0.7, age);
    }
    for (std::size_t i = 0; i < outs.size(); ++i)
      if (!outs[i]) fail += std::pow(0.9, static_cast<double>(outs.size() - 1 - i));
    const auto r = rpfa_features(outs, 0.9, 0.7, 3);
    EXPECT_NEAR(r.recency, num / den, 1e-12);
    EXPECT_NEAR(r.failures, fail, 1e-12);
  }
}

TEST(Features, PpeExamples) {
  EXPECT_EQ(ppe_feature({}, 100, 1, 0.6, 0.01, 0.028), 0.0);
  const std::vector<std::int64_t> one = {0};
  EXPECT_NEAR(ppe_feature(one, 3600, 1, 0.6, 0.01, 0.028), 0.7326, 1e-3);
  EXPECT_NEAR(ppe_feature(one, 3600, 1, 0.6, 0.01, 0.028), std::pow(3600.0, -0.038), 1e-12);

  const std::vector<std::int64_t> many = {0, 600, 4000, 90000};
  double prev = std::numeric_limits<double>::infinity();
  for (std::int64_t now = 90001; now < 90001 + 60 * 86400; now += 3797) {
    const double v = ppe_feature(many, now, 1, 0.6, 0.01, 0.028);
    EXPECT_LT(v, prev);
    prev = v;
  }
  // Direct evaluation of the stated formula.
  const std::int64_t now = 200000;
  double wsum = 0, T = 0, gaps = 0;
  for (auto t : many) wsum += std::pow(double(now - t), -0.6);
  for (auto t : many) T += std::pow(double(now - t), -0.6) / wsum * double(now - t);
  for (std::size_t i = 1; i < many.size(); ++i) gaps += 1.0 / std::log(double(many[i] - many[i - 1]) + std::exp(1.0));
  const double dcy = 0.01 + 0.028 * gaps / 3.0;
  EXPECT_NEAR(ppe_feature(many, now, 1, 0.6, 0.01, 0.028), std::pow(4.0, 0.6) * std::pow(T, -dcy), 1e-12);
}

TEST(Features, ResponsePattern) {
  auto none = response_pattern({}, 10);
  ASSERT_EQ(none.size(), 20u);
  for (double v : none) EXPECT_EQ(v, 0.0);

  const std::vector<std::uint8_t> last_correct = {0, 1};
  auto p = response_pattern(last_correct, 10);
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(p[1], 0.0);
  EXPECT_EQ(p[3], 1.0);

  std::vector<std::uint8_t> twelve = {1, 1, 0, 1, 0, 0, 1, 1, 1, 0, 1, 0};
  auto q = response_pattern(twelve, 10);
  int populated = 0;
  for (int i = 0; i < 10; ++i) {
    populated += static_cast<int>(q[2 * i] + q[2 * i + 1]);
    const int y = twelve[twelve.size() - 1 - static_cast<std::size_t>(i)];
    EXPECT_EQ(q[2 * i], y ? 1.0 : 0.0);
  }
  EXPECT_EQ(populated, 10);
  EXPECT_THROW(response_pattern({}, 0), ConfigError);
}

TEST(Features, LagAndResponseTime) {
  EXPECT_EQ(lag_response_time_features(std::nullopt, std::nullopt), std::make_pair(0.0, 0.0));
  EXPECT_NEAR(lag_response_time_features(std::nullopt, 60000).second, 4.1109, 1e-3);
  const std::int64_t month_ms = 30LL * 86400 * 1000;
  EXPECT_EQ(lag_response_time_features(month_ms, month_ms).second, phi(604800));
  EXPECT_EQ(lag_response_time_features(month_ms, std::nullopt).first, phi(604800));
}

TEST(Features, DifficultyBuckets) {
  EXPECT_EQ(difficulty_bucket(10), 0u);
  EXPECT_EQ(difficulty_bucket(14), 0u);
  EXPECT_EQ(difficulty_bucket(15), 1u);
  EXPECT_EQ(difficulty_bucket(90), 8u);
  EXPECT_EQ(difficulty_bucket(5), 0u);
}

TEST(Features, HyperParamsValidate) {
  HyperParams h;
  EXPECT_NO_THROW(h.validate());
  h.decay_failure = 1.2;
  EXPECT_THROW(h.validate(), ConfigError);
  h = {};
  h.smoothing_eta = 0;
  EXPECT_THROW(h.validate(), ConfigError);
}

TEST(Features, SequenceExtractionIsDeterministic) {
  const auto suite = generate_transfer_suite(small_synth(5), 2);
  const auto& d = suite.datasets[2];
  const auto schema = build_schema(find_preset("AugLR").config, &d.meta(), keys_of(d));
  FeatureExtractor fx(schema, 0.6, &d.meta());
  for (const auto& h : d.histories()) EXPECT_EQ(fx.extract_sequence(h), fx.extract_sequence(h));
}
