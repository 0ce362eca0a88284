#include "ktransfer/transfer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "json_io.hpp"
#include "ktransfer/errors.hpp"

namespace ktransfer {

const char* to_string(ModelClass c) {
  switch (c) {
    case ModelClass::logistic: return "logistic";
    case ModelClass::bkt: return "bkt";
    case ModelClass::irt_online: return "irt-online";
    case ModelClass::constant: return "constant";
  }
  return "?";
}

std::optional<ModelClass> parse_model_class(std::string_view s) {
  for (auto c : {ModelClass::logistic, ModelClass::bkt, ModelClass::irt_online, ModelClass::constant})
    if (s == to_string(c)) return c;
  return std::nullopt;
}

namespace {

using F = Family;

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

ModelSpec logistic(std::string name, std::vector<Family> fams, bool agnostic) {
  return {std::move(name), ModelClass::logistic, ExtractorConfig(std::move(fams)), agnostic};
}

std::vector<ModelSpec> make_zoo() {
  const std::vector<F> best_lr = {F::bias, F::student_onehot, F::question_onehot, F::kc_onehot, F::kc_counts,
                                  F::total_counts};
  std::vector<F> best_lr_plus = best_lr;
  best_lr_plus.insert(best_lr_plus.end(),
                      {F::response_pattern, F::smoothed_correctness, F::time_window_kc, F::rpfa, F::ppe});
  const std::vector<F> aug_extra = {F::lag_time,       F::response_time,     F::context_onehot,
                                    F::context_counts, F::difficulty_onehot, F::difficulty_counts};
  std::vector<F> auglr = best_lr_plus;
  auglr.insert(auglr.end(), aug_extra.begin(), aug_extra.end());

  const std::vector<F> a_best_lr = {F::bias, F::student_onehot, F::total_counts, F::kc_counts_shared};
  std::vector<F> a_best_lr_plus = a_best_lr;
  a_best_lr_plus.insert(a_best_lr_plus.end(),
                        {F::response_pattern, F::smoothed_correctness, F::time_window_shared, F::rpfa, F::ppe});
  std::vector<F> a_auglr = a_best_lr_plus;
  a_auglr.insert(a_auglr.end(), aug_extra.begin(), aug_extra.end());

  auto plus = [](std::vector<F> base, std::initializer_list<F> extra) {
    base.insert(base.end(), extra);
    return base;
  };

  std::vector<ModelSpec> zoo;
  zoo.push_back({"Always-correct", ModelClass::constant, {}, true});
  zoo.push_back(logistic("IRT", {F::student_onehot, F::question_onehot}, false));
  zoo.push_back(logistic("PFA", {F::kc_onehot, F::kc_counts}, false));
  zoo.push_back(logistic("DAS3H", {F::student_onehot, F::question_onehot, F::kc_onehot, F::time_window_kc}, false));
  zoo.push_back(logistic("Best-LR", best_lr, false));
  zoo.push_back(logistic("Best-LR+", best_lr_plus, false));
  zoo.push_back(logistic("AugLR", auglr, false));
  zoo.push_back({"BKT", ModelClass::bkt, {}, false});
  zoo.push_back({"A-BKT", ModelClass::bkt, {}, true});
  zoo.push_back({"A-IRT", ModelClass::irt_online, ExtractorConfig({F::bias, F::student_onehot}), true});
  zoo.push_back(logistic("A-PFA", {F::bias, F::kc_counts_shared}, true));
  zoo.push_back(logistic("A-DAS3H", {F::bias, F::student_onehot, F::time_window_shared}, true));
  zoo.push_back(logistic("A-Best-LR", a_best_lr, true));
  zoo.push_back(logistic("A-Best-LR+", a_best_lr_plus, true));
  zoo.push_back(logistic("A-AugLR", a_auglr, true));
  zoo.push_back(logistic("A-AugLR+KC", plus(a_auglr, {F::kc_onehot, F::kc_counts}), false));
  zoo.push_back(logistic("A-AugLR+quest", plus(a_auglr, {F::question_onehot}), false));
  zoo.push_back(logistic("A-AugLR+KC+quest", plus(a_auglr, {F::kc_onehot, F::kc_counts, F::question_onehot}), false));
  return zoo;
}

std::vector<std::string> student_keys(const std::vector<const Dataset*>& datasets) {
  std::vector<std::string> keys;
  for (const auto* d : datasets)
    for (const auto& h : d->histories()) keys.push_back(student_key(d->course_id(), h.student_id));
  return keys;
}

Design build_design(const FeatureSchema& schema, double p_bar, const std::vector<const Dataset*>& datasets) {
  Design out(schema.dim());
  for (const auto* d : datasets) {
    FeatureExtractor fx(schema, p_bar, &d->meta());
    for (const auto& h : d->histories()) fx.append_sequence(h, out);
  }
  return out;
}

LogisticModel fit_logistic(const std::string& name, const ExtractorConfig& config,
                           const std::vector<const Dataset*>& datasets, const TrainConfig& tc) {
  const CourseMeta* meta = config.agnostic() || datasets.empty() ? nullptr : &datasets.front()->meta();
  if (!config.agnostic() && datasets.size() != 1)
    throw ConfigError("course-specific model '" + name + "' needs exactly one course");
  LogisticModel m;
  m.name = name;
  m.schema = build_schema(config, meta, student_keys(datasets));
  m.global_correct_rate = global_correct_rate(datasets);
  m.train_config = tc;
  for (const auto* d : datasets) m.source_courses.push_back(d->course_id());
  m.weights = train(build_design(m.schema, m.global_correct_rate, datasets), m.schema, tc);
  return m;
}

std::string inductive_name(const std::string& agnostic_name) {
  if (agnostic_name.rfind("A-", 0) == 0) return "I-" + agnostic_name.substr(2);
  return "I-" + agnostic_name;
}

bool has_questions(const Dataset& d) { return d.question_interaction_count() > 0; }

}  // namespace

const std::vector<ModelSpec>& preset_zoo() {
  static const std::vector<ModelSpec> zoo = make_zoo();
  return zoo;
}

ModelSpec find_preset(std::string_view name) {
  const std::string key = lower(name);
  std::string known;
  for (const auto& s : preset_zoo()) {
    if (lower(s.name) == key) return s;
    known += (known.empty() ? "" : ", ") + s.name;
  }
  throw ConfigError("unknown model '" + std::string(name) + "' (known: " + known + ")");
}

std::vector<ModelSpec> conventional_presets() {
  std::vector<ModelSpec> out;
  for (const char* n : {"BKT", "IRT", "PFA", "DAS3H", "Best-LR", "Best-LR+", "AugLR"}) out.push_back(find_preset(n));
  return out;
}

HyperParams hyper_from_json_text(const std::string& json_text, HyperParams base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  return j.contains("hyper") ? detail::hyper_from_json(j.at("hyper"), base) : base;
}

std::string hyper_to_json_text(const HyperParams& hyper) { return detail::hyper_to_json(hyper).dump(); }

TrainConfig train_config_from_json_text(const std::string& json_text, TrainConfig base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  return j.contains("train") ? detail::train_config_from_json(j.at("train"), base) : base;
}

std::string train_config_to_json_text(const TrainConfig& config) {
  return detail::train_config_to_json(config).dump();
}

std::vector<ModelSpec> model_specs_from_json_text(const std::string& json_text, const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  const HyperParams hyper = j.contains("hyper") ? detail::hyper_from_json(j.at("hyper")) : HyperParams{};
  std::vector<ModelSpec> out;
  if (!j.contains("models") || !j.at("models").is_array()) throw ConfigError(origin + ": missing 'models' array");
  for (const auto& m : j.at("models")) {
    if (m.is_string()) {
      ModelSpec s = find_preset(m.get<std::string>());
      s.config.hyper = hyper;
      out.push_back(std::move(s));
      continue;
    }
    try {
      const auto name = m.at("name").get<std::string>();
      ModelSpec s;
      if (!m.contains("families")) {
        s = find_preset(name);
      } else {
        s.name = name;
        const auto cls = m.value("class", std::string("logistic"));
        auto kind = parse_model_class(cls);
        if (!kind) throw ConfigError("model '" + name + "': unknown class '" + cls + "'");
        s.kind = *kind;
        s.config = ExtractorConfig::from_names(m.at("families").get<std::vector<std::string>>());
        s.agnostic = m.value("agnostic", s.config.agnostic());
        if (s.agnostic && !s.config.agnostic())
          throw ConfigError("model '" + name + "' is marked agnostic but uses course-specific families");
      }
      s.config.hyper = hyper;
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(origin + ": " + e.what());
    }
  }
  return out;
}

std::vector<ModelSpec> load_model_specs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return model_specs_from_json_text(buf.str(), path.string());
}

AgnosticModel train_agnostic(const std::vector<const Dataset*>& sources, const ModelSpec& spec,
                             const TrainConfig& config) {
  if (!spec.agnostic) throw ConfigError("model '" + spec.name + "' is not course-agnostic");
  if (sources.empty()) throw ConfigError("naive transfer needs at least one source course");
  config.validate();
  AgnosticModel m;
  m.spec = spec;
  m.global_correct_rate = global_correct_rate(sources);
  for (const auto* d : sources) m.source_courses.push_back(d->course_id());
  switch (spec.kind) {
    case ModelClass::logistic:
      m.logistic = fit_logistic(spec.name, spec.config, sources, config);
      break;
    case ModelClass::bkt:
      m.bkt = BktModel{fit_agnostic_bkt(sources).params, {}};
      break;
    case ModelClass::irt_online:
      m.airt_delta = fit_airt_difficulty(sources, config);
      break;
    case ModelClass::constant:
      break;
  }
  return m;
}

FittedModel train_model(const Dataset& dataset, const ModelSpec& spec, const TrainConfig& config) {
  config.validate();
  if (spec.agnostic) return train_agnostic({&dataset}, spec, config);
  FittedModel m;
  m.spec = spec;
  m.global_correct_rate = global_correct_rate({&dataset});
  m.source_courses = {dataset.course_id()};
  switch (spec.kind) {
    case ModelClass::logistic:
      m.logistic = fit_logistic(spec.name, spec.config, {&dataset}, config);
      break;
    case ModelClass::bkt:
      if (!has_questions(dataset)) throw ConfigError("BKT needs at least one question interaction");
      m.bkt = fit_course_bkt(dataset);
      break;
    case ModelClass::irt_online:
      m.airt_delta = fit_airt_difficulty({&dataset}, config);
      break;
    case ModelClass::constant:
      break;
  }
  return m;
}

std::vector<Prediction> predict(const FittedModel& model, const Dataset& dataset) {
  switch (model.spec.kind) {
    case ModelClass::bkt:
      return predict_dataset_bkt(model.bkt, dataset);
    case ModelClass::irt_online:
      return predict_online_airt(model.airt_delta, dataset, model.airt_step);
    case ModelClass::constant: {
      std::vector<Prediction> out;
      for (const auto& h : dataset.histories())
        for (const auto& x : h.interactions)
          if (x.is_question()) out.emplace_back(1.0, x.correct.value_or(0));
      return out;
    }
    case ModelClass::logistic:
      break;
  }
  const auto& lm = model.logistic;
  if (lm.weights.dim() != lm.schema.dim() || lm.weights.fingerprint != lm.schema.fingerprint())
    throw SchemaError("model '" + lm.name + "' weights do not match its schema");
  FeatureExtractor fx(lm.schema, lm.global_correct_rate, &dataset.meta());
  std::vector<Prediction> out;
  out.reserve(dataset.question_interaction_count());
  for (const auto& h : dataset.histories()) {
    RollingState state = fx.fresh_state();
    const std::string key = student_key(h.course_id, h.student_id);
    for (const auto& x : h.interactions) {
      if (x.is_question()) out.emplace_back(predict_proba(lm.weights, fx.extract(state, x, key)), x.correct.value_or(0));
      state.update(x);
    }
  }
  return out;
}

std::vector<Prediction> apply_agnostic(const AgnosticModel& model, const Dataset& target) {
  if (!model.spec.agnostic) throw ConfigError("model '" + model.spec.name + "' is not course-agnostic");
  return predict(model, target);
}

const std::vector<Family>& inductive_target_families() {
  static const std::vector<Family> f = {Family::question_onehot, Family::kc_onehot, Family::kc_counts};
  return f;
}

FeatureSchema inductive_target_schema(const AgnosticModel& model, const CourseMeta& target_meta) {
  if (model.spec.kind != ModelClass::logistic)
    throw ConfigError("inductive transfer needs a logistic agnostic model, got '" + model.spec.name + "'");
  return extend_schema(model.logistic.schema, inductive_target_families(), target_meta);
}

PriorSpec embed_prior(const AgnosticModel& model, const FeatureSchema& target_schema, double lambda) {
  if (model.spec.kind != ModelClass::logistic) throw ConfigError("prior embedding needs a logistic model");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  const auto& src = model.logistic.schema;
  const auto& w = model.logistic.weights;
  if (w.dim() != src.dim()) throw SchemaError("agnostic weights do not match their schema");
  if (!(target_schema.hyper() == src.hyper())) throw SchemaError("target schema uses different hyperparameters");
  const auto& tb = target_schema.blocks();
  if (tb.size() < src.blocks().size()) throw SchemaError("target schema lacks agnostic blocks of the source model");
  for (std::size_t i = 0; i < src.blocks().size(); ++i)
    if (!(tb[i] == src.blocks()[i]))
      throw SchemaError(std::string("target block '") + family_name(tb[i].family) +
                        "' differs from the source layout");
  PriorSpec prior{WeightVector::zeros(target_schema), lambda};
  std::copy(w.values.begin(), w.values.end(), prior.center.values.begin());
  return prior;
}

TargetModel tune_inductive(const AgnosticModel& model, const Dataset& pilot, double lambda, const TrainConfig& config) {
  config.validate();
  const FeatureSchema schema = inductive_target_schema(model, pilot.meta());
  PriorSpec prior = embed_prior(model, schema, lambda);
  TargetModel t;
  t.spec = model.spec;
  t.spec.name = inductive_name(model.spec.name);
  t.spec.agnostic = false;
  t.spec.config = ExtractorConfig(schema.families(), schema.hyper());
  t.global_correct_rate = model.global_correct_rate;
  t.lambda = lambda;
  t.source_courses = model.source_courses;
  t.logistic = model.logistic;
  t.logistic.name = t.spec.name;
  t.logistic.schema = schema;
  t.logistic.lambda = lambda;
  t.logistic.train_config = config;
  if (!has_questions(pilot)) {
    t.logistic.weights = prior.center;
    return t;
  }
  const Design d = build_design(schema, model.global_correct_rate, {&pilot});
  t.logistic.weights = train(d, schema, config, &prior, &prior.center);
  return t;
}

TargetModel train_scratch(const Dataset& pilot, const ModelSpec& spec, const TrainConfig& config,
                          const ScratchOptions& opts) {
  if (!has_questions(pilot)) throw ConfigError("from-scratch training needs a non-empty pilot");
  if (spec.kind != ModelClass::logistic) {
    if (opts.schema || opts.init) throw ConfigError("schema/init overrides apply to logistic models only");
    return train_model(pilot, spec, config);
  }
  config.validate();
  TargetModel t;
  t.spec = spec;
  t.global_correct_rate = opts.global_correct_rate.value_or(global_correct_rate({&pilot}));
  t.source_courses = {pilot.course_id()};
  auto& lm = t.logistic;
  lm.name = spec.name;
  lm.schema = opts.schema ? *opts.schema
                          : build_schema(spec.config, spec.config.agnostic() ? nullptr : &pilot.meta(),
                                         student_keys({&pilot}));
  lm.global_correct_rate = t.global_correct_rate;
  lm.train_config = config;
  lm.source_courses = t.source_courses;
  const Design d = build_design(lm.schema, t.global_correct_rate, {&pilot});
  lm.weights = train(d, lm.schema, config, nullptr, opts.init);
  return t;
}

double fit_airt_difficulty(const std::vector<const Dataset*>& sources, const TrainConfig& config) {
  const ExtractorConfig cfg({Family::bias, Family::student_onehot});
  const LogisticModel m = fit_logistic("A-IRT", cfg, sources, config);
  const auto* bias = m.schema.block(Family::bias);
  return -m.weights.values[bias->offset];
}

std::vector<Prediction> predict_online_airt(double delta, const Dataset& target, double step) {
  std::vector<Prediction> out;
  out.reserve(target.question_interaction_count());
  for (const auto& h : target.histories()) {
    std::unordered_map<std::string, double> ability;
    for (const auto& x : h.interactions) {
      if (!x.is_question() || x.kc_ids.empty()) continue;
      double sum = 0.0;
      for (const auto& k : x.kc_ids) sum += sigmoid(ability[k] - delta);
      const int y = x.correct.value_or(0);
      out.emplace_back(sum / static_cast<double>(x.kc_ids.size()), y);
      for (const auto& k : x.kc_ids) {
        double& a = ability[k];
        a += step * (y - sigmoid(a - delta));
      }
    }
  }
  return out;
}

}  // namespace ktransfer
