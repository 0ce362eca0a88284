#include "ktransfer/linmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ktransfer/errors.hpp"
#include "ktransfer/random.hpp"

namespace ktransfer {

namespace {

constexpr double kProbFloor = 1e-12;

// -log sigma(a) without overflow.
double softplus(double a) { return std::max(a, 0.0) + std::log1p(std::exp(-std::abs(a))); }

double nll(double z, int y) { return y ? softplus(-z) : softplus(z); }

void check_dim(const WeightVector& w, std::size_t dim) {
  if (w.dim() != dim)
    throw SchemaError("dimension mismatch: weights " + std::to_string(w.dim()) + ", features " + std::to_string(dim));
}

double prior_penalty(const WeightVector& w, const PriorSpec& prior) {
  check_dim(prior.center, w.dim());
  double s = 0.0;
  for (std::size_t j = 0; j < w.dim(); ++j) {
    const double d = w.values[j] - prior.center.values[j];
    s += d * d;
  }
  return 0.5 * prior.lambda * s;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("Adam decays must lie in [0, 1)");
  if (!(epsilon > 0)) throw ConfigError("Adam epsilon must be positive");
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double dot(const std::vector<double>& w, SparseView x) {
  double z = 0.0;
  for (std::size_t k = 0; k < x.index.size(); ++k) z += w[x.index[k]] * x.value[k];
  return z;
}

double predict_proba(const WeightVector& w, SparseView x) {
  check_dim(w, x.dim);
  return std::clamp(sigmoid(dot(w.values, x)), kProbFloor, 1.0 - kProbFloor);
}

LossValue loss(const WeightVector& w, const Design& pairs, const PriorSpec* prior) {
  check_dim(w, pairs.dim());
  LossValue out;
  if (pairs.empty() && !prior) {
    out.undefined = true;
    return out;
  }
  for (std::size_t i = 0; i < pairs.rows(); ++i) out.value += nll(dot(w.values, pairs.row(i)), pairs.label(i));
  if (prior) out.value += prior_penalty(w, *prior);
  return out;
}

std::vector<double> gradient(const WeightVector& w, const Design& batch, const PriorSpec* prior) {
  check_dim(w, batch.dim());
  std::vector<double> g(w.dim(), 0.0);
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    const auto x = batch.row(i);
    const double r = sigmoid(dot(w.values, x)) - batch.label(i);
    for (std::size_t k = 0; k < x.index.size(); ++k) g[x.index[k]] += r * x.value[k];
  }
  if (prior) {
    check_dim(prior->center, w.dim());
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += prior->lambda * (w.values[j] - prior->center.values[j]);
  }
  return g;
}

namespace {

constexpr std::size_t kPrefetchRows = 4;

void prefetch_row([[maybe_unused]] SparseView x) {
#if defined(__GNUC__)
  for (std::size_t o = 0; o < x.index.size(); o += 16) __builtin_prefetch(x.index.data() + o);
  for (std::size_t o = 0; o < x.value.size(); o += 8) __builtin_prefetch(x.value.data() + o);
#endif
}

}  // namespace

WeightVector train(const Design& pairs, const FeatureSchema& schema, const TrainConfig& config,
                   const PriorSpec* prior, const WeightVector* init, TrainReport* report) {
  config.validate();
  if (pairs.dim() != schema.dim()) throw SchemaError("training pairs do not conform to the schema");
  if (prior && !(prior->lambda >= 0)) throw ConfigError("prior lambda must be non-negative");
  if (prior) check_dim(prior->center, schema.dim());

  const std::size_t dim = schema.dim();
  WeightVector w = init ? *init : WeightVector::zeros(schema);
  check_dim(w, dim);
  w.fingerprint = schema.fingerprint();

  TrainReport rep;
  rep.initial_loss = loss(w, pairs, prior).value;
  if (!std::isfinite(rep.initial_loss)) throw TrainingError("initial loss is not finite");

  const std::size_t n = pairs.rows();
  const std::size_t batch = config.batch_size == 0 ? std::max<std::size_t>(n, 1) : config.batch_size;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(config.seed, {0xada3}));

  std::vector<double> g(dim, 0.0), m(dim, 0.0), v(dim, 0.0);
  auto& wv = w.values;
  std::size_t t = 0;

  for (int epoch = 0; epoch < config.epochs && n > 0; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      for (std::size_t b = start; b < end; ++b) {
        // Rows are visited in shuffled order; fetch a few rows ahead.
        if (b + kPrefetchRows < end) prefetch_row(pairs.row(order[b + kPrefetchRows]));
        const auto x = pairs.row(order[b]);
        const double r = sigmoid(dot(wv, x)) - pairs.label(order[b]);
        for (std::size_t k = 0; k < x.index.size(); ++k) g[x.index[k]] += r * x.value[k];
      }
      if (prior) {
        const double scale = prior->lambda * static_cast<double>(end - start) / static_cast<double>(n);
        const auto& c = prior->center.values;
        for (std::size_t j = 0; j < dim; ++j) g[j] += scale * (wv[j] - c[j]);
      }

      ++t;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
      const double step = config.learning_rate / bc1;
      const double sqrt_bc2 = std::sqrt(bc2);
      const double b1 = config.beta1, b2 = config.beta2, eps = config.epsilon;
      for (std::size_t j = 0; j < dim; ++j) {
        const double gj = g[j];
        m[j] = b1 * m[j] + (1.0 - b1) * gj;
        v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
        wv[j] -= step * m[j] / (std::sqrt(v[j]) / sqrt_bc2 + eps);
        g[j] = 0.0;
      }
    }
    if (!std::all_of(wv.begin(), wv.end(), [](double x) { return std::isfinite(x); }))
      throw TrainingError("non-finite weights (loss diverged) in epoch " + std::to_string(epoch) + " after " +
                          std::to_string(t) + " steps");
  }

  rep.steps = t;
  rep.final_loss = loss(w, pairs, prior).value;
  if (!std::isfinite(rep.final_loss)) throw TrainingError("final loss is not finite");
  if (report) *report = rep;
  return w;
}

}  // namespace ktransfer
