#include <benchmark/benchmark.h>

#include <vector>

#include "ktransfer/bkt.hpp"
#include "ktransfer/eval.hpp"
#include "ktransfer/features.hpp"
#include "ktransfer/linmodel.hpp"
#include "ktransfer/random.hpp"
#include "ktransfer/synth.hpp"
#include "ktransfer/transfer.hpp"

using namespace ktransfer;

namespace {

const SyntheticSuite& suite() {
  static const SyntheticSuite s = [] {
    SynthConfig c;
    c.course_count = 2;
    c.students_per_course = 200;
    return generate_transfer_suite(c, 1);
  }();
  return s;
}

const Dataset& course() { return suite().datasets[0]; }

FeatureSchema schema_for(const char* preset) {
  return build_schema(find_preset(preset).config, &course().meta(), {});
}

void BM_ExtractDesign(benchmark::State& state, const char* preset) {
  const auto schema = schema_for(preset);
  const FeatureExtractor fx(schema, 0.68, &course().meta());
  std::size_t rows = 0;
  for (auto _ : state) {
    const auto d = fx.design(course());
    rows += d.rows();
    benchmark::DoNotOptimize(d);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(rows));
}
BENCHMARK_CAPTURE(BM_ExtractDesign, pfa, "A-PFA")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ExtractDesign, auglr, "A-AugLR")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ExtractDesign, auglr_kc_quest, "A-AugLR+KC+quest")->Unit(benchmark::kMillisecond);

void BM_TrainEpoch(benchmark::State& state) {
  const auto schema = schema_for("A-AugLR");
  const auto design = FeatureExtractor(schema, 0.68, &course().meta()).design(course());
  TrainConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train(design, schema, cfg));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * design.rows()));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

void BM_Auc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<double> p(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = rng.uniform();
    y[i] = rng.bernoulli(p[i]);
  }
  for (auto _ : state) benchmark::DoNotOptimize(auc(p, y));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_Auc)->Range(1 << 10, 1 << 20);

void BM_BktEmStep(benchmark::State& state) {
  Rng rng(4);
  std::vector<OutcomeSequence> seqs(2000);
  for (auto& s : seqs)
    for (int i = 0; i < 20; ++i) s.push_back(rng.bernoulli(0.6) ? 1 : 0);
  BktParams p;
  for (auto _ : state) benchmark::DoNotOptimize(p = em_step(p, seqs));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2000 * 20));
}
BENCHMARK(BM_BktEmStep);

void BM_BktPredictCourse(benchmark::State& state) {
  const auto model = fit_course_bkt(course());
  for (auto _ : state) benchmark::DoNotOptimize(predict_dataset_bkt(model, course()));
}
BENCHMARK(BM_BktPredictCourse)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
