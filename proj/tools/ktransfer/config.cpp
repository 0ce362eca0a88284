#include "config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ktransfer/errors.hpp"
#include "ktransfer/ingest.hpp"

namespace ktransfer::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <class T, std::size_t N>
void read_array(const json& j, const char* key, std::array<T, N>& out) {
  if (!j.contains(key)) return;
  const auto v = j.at(key).get<std::vector<T>>();
  if (v.size() != N) throw ConfigError(std::string(key) + " needs " + std::to_string(N) + " entries");
  std::copy(v.begin(), v.end(), out.begin());
}

DataSource data_from_json(const json& j) {
  DataSource d;
  if (j.is_string()) {
    if (j.get<std::string>() == "synthetic") {
      d.synthetic = true;
    } else {
      d.dir = j.get<std::string>();
    }
    return d;
  }
  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    d.synthetic = !s.is_boolean() || s.get<bool>();
    if (s.is_object()) d.synth = synth_from_json(s);
  }
  if (j.contains("dir")) d.dir = j.at("dir").get<std::string>();
  if (j.contains("logs"))
    for (const auto& p : j.at("logs")) d.logs.emplace_back(p.get<std::string>());
  if (j.contains("registry")) d.registry = j.at("registry").get<std::string>();
  if (j.contains("prereqs")) d.prereqs = j.at("prereqs").get<std::string>();
  if (j.contains("mapping")) d.mapping = j.at("mapping").get<std::string>();
  read_key(j, "min_responses", d.min_responses);
  return d;
}

json data_to_json(const DataSource& d) {
  if (d.synthetic) return {{"synthetic", synth_to_json(d.synth)}, {"min_responses", d.min_responses}};
  json logs = json::array();
  for (const auto& p : d.logs) logs.push_back(p.generic_string());
  return {{"dir", d.dir.generic_string()},         {"logs", logs},
          {"registry", d.registry.generic_string()}, {"prereqs", d.prereqs.generic_string()},
          {"mapping", d.mapping.generic_string()}, {"min_responses", d.min_responses}};
}

bool is_sidecar(const fs::path& p) {
  const auto name = p.filename().string();
  return name == "registry.csv" || name == "prereqs.csv" || name == "ground_truth.csv" || name == "summary.csv";
}

}  // namespace

SynthConfig synth_from_json(const json& j, SynthConfig c) {
  try {
    read_key(j, "course_count", c.course_count);
    read_key(j, "kcs_per_course", c.kcs_per_course);
    read_key(j, "questions_per_course", c.questions_per_course);
    read_key(j, "topics_per_course", c.topics_per_course);
    read_key(j, "students_per_course", c.students_per_course);
    read_key(j, "kc_difficulty_sd", c.kc_difficulty_sd);
    read_key(j, "question_difficulty_sd", c.question_difficulty_sd);
    read_key(j, "rating_noise_sd", c.rating_noise_sd);
    read_key(j, "second_kc_probability", c.second_kc_probability);
    read_key(j, "ability_mean", c.ability_mean);
    read_key(j, "ability_sd", c.ability_sd);
    read_key(j, "ability_drift_sd", c.ability_drift_sd);
    read_key(j, "session_shift_sd", c.session_shift_sd);
    read_key(j, "success_growth", c.success_growth);
    read_key(j, "failure_growth", c.failure_growth);
    read_key(j, "learn_rate_mean", c.learn_rate_mean);
    read_key(j, "learn_rate_sd", c.learn_rate_sd);
    read_key(j, "material_gain", c.material_gain);
    read_key(j, "skill_cap", c.skill_cap);
    read_key(j, "forgetting_days", c.forgetting_days);
    read_key(j, "guess", c.guess);
    read_key(j, "slip", c.slip);
    read_array(j, "context_effect", c.context_effect);
    read_array(j, "context_questions", c.context_questions);
    read_key(j, "video_probability", c.video_probability);
    read_key(j, "reading_probability", c.reading_probability);
    read_key(j, "dropout_fraction", c.dropout_fraction);
    read_key(j, "session_gap_mean_h", c.session_gap_mean_h);
    read_key(j, "session_gap_min_h", c.session_gap_min_h);
    read_key(j, "response_time_median_s", c.response_time_median_s);
    read_key(j, "response_time_sigma", c.response_time_sigma);
    read_key(j, "correctness_high", c.correctness_high);
    read_key(j, "correctness_low", c.correctness_low);
    read_key(j, "calibration_students", c.calibration_students);
    read_key(j, "start_timestamp", c.start_timestamp);
    read_key(j, "seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic config: ") + e.what());
  }
  c.validate();
  return c;
}

json synth_to_json(const SynthConfig& c) {
  return {{"course_count", c.course_count},
          {"kcs_per_course", c.kcs_per_course},
          {"questions_per_course", c.questions_per_course},
          {"topics_per_course", c.topics_per_course},
          {"students_per_course", c.students_per_course},
          {"kc_difficulty_sd", c.kc_difficulty_sd},
          {"question_difficulty_sd", c.question_difficulty_sd},
          {"rating_noise_sd", c.rating_noise_sd},
          {"second_kc_probability", c.second_kc_probability},
          {"ability_mean", c.ability_mean},
          {"ability_sd", c.ability_sd},
          {"ability_drift_sd", c.ability_drift_sd},
          {"session_shift_sd", c.session_shift_sd},
          {"success_growth", c.success_growth},
          {"failure_growth", c.failure_growth},
          {"learn_rate_mean", c.learn_rate_mean},
          {"learn_rate_sd", c.learn_rate_sd},
          {"material_gain", c.material_gain},
          {"skill_cap", c.skill_cap},
          {"forgetting_days", c.forgetting_days},
          {"guess", c.guess},
          {"slip", c.slip},
          {"context_effect", c.context_effect},
          {"context_questions", c.context_questions},
          {"video_probability", c.video_probability},
          {"reading_probability", c.reading_probability},
          {"dropout_fraction", c.dropout_fraction},
          {"session_gap_mean_h", c.session_gap_mean_h},
          {"session_gap_min_h", c.session_gap_min_h},
          {"response_time_median_s", c.response_time_median_s},
          {"response_time_sigma", c.response_time_sigma},
          {"correctness_high", c.correctness_high},
          {"correctness_low", c.correctness_low},
          {"calibration_students", c.calibration_students},
          {"start_timestamp", c.start_timestamp},
          {"seed", c.seed}};
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ExperimentConfig resolve_config(const json& file, const json& overrides) {
  json doc = file.is_null() ? json::object() : file;
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  doc.merge_patch(overrides);

  ExperimentConfig c;
  try {
    if (doc.contains("data")) c.data = data_from_json(doc.at("data"));
    if (doc.contains("models")) {
      c.models = doc.at("models");
      if (!c.models.is_array()) c.models = json::array({c.models});
    }
    c.hyper = hyper_from_json_text(doc.dump());
    c.train = train_config_from_json_text(doc.dump());
    read_key(doc, "mode", c.mode);
    read_key(doc, "pilot_sizes", c.pilot_sizes);
    read_key(doc, "seeds", c.seeds);
    read_key(doc, "folds_per_seed", c.folds_per_seed);
    read_key(doc, "k", c.k);
    read_key(doc, "lambda", c.lambda);
    read_key(doc, "seed", c.seed);
    read_key(doc, "target", c.target);
    if (doc.contains("out")) c.out = doc.at("out").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  static const std::vector<std::string> modes = {"naive", "pairwise", "inductive", "cv-reference"};
  if (std::find(modes.begin(), modes.end(), c.mode) == modes.end())
    throw ConfigError("unknown mode '" + c.mode + "' (naive, pairwise, inductive, cv-reference)");
  if (c.k < 2) throw ConfigError("k must be >= 2");
  if (c.folds_per_seed < 1 || c.folds_per_seed > c.k) throw ConfigError("folds_per_seed must be in [1, k]");
  if (c.lambda < 0) throw ConfigError("lambda must be >= 0");
  if (c.seeds.empty()) throw ConfigError("seeds must not be empty");
  if (c.out.empty()) {
    const char* env = std::getenv("KTRANSFER_OUT");
    c.out = (env && *env) ? fs::path(env) : fs::path("ktransfer_out");
  }
  return c;
}

std::vector<ModelSpec> ExperimentConfig::model_specs() const {
  json doc = {{"hyper", json::parse(hyper_to_json_text(hyper))}, {"models", models}};
  return model_specs_from_json_text(doc.dump());
}

json ExperimentConfig::to_json() const {
  return {{"data", data_to_json(data)},
          {"models", models},
          {"hyper", json::parse(hyper_to_json_text(hyper))},
          {"train", json::parse(train_config_to_json_text(train))},
          {"mode", mode},
          {"pilot_sizes", pilot_sizes},
          {"seeds", seeds},
          {"folds_per_seed", folds_per_seed},
          {"k", k},
          {"lambda", lambda},
          {"seed", seed},
          {"target", target},
          {"out", out.generic_string()}};
}

std::vector<Dataset> load_courses(const DataSource& src, std::uint64_t seed, bool apply_min_filter) {
  std::vector<Dataset> courses;
  if (src.synthetic) {
    courses = generate_transfer_suite(src.synth, seed).datasets;
  } else {
    fs::path registry_path = src.registry;
    if (registry_path.empty()) {
      if (src.dir.empty()) throw ConfigError("data source needs 'dir' or 'registry'");
      registry_path = src.dir / "registry.csv";
    }
    CourseRegistry registry = read_registry_csv(registry_path);
    fs::path prereq_path = src.prereqs;
    if (prereq_path.empty() && !src.dir.empty() && fs::exists(src.dir / "prereqs.csv"))
      prereq_path = src.dir / "prereqs.csv";
    if (!prereq_path.empty()) read_prereq_csv(prereq_path, registry);

    std::vector<fs::path> logs = src.logs;
    if (logs.empty()) {
      if (src.dir.empty() || !fs::is_directory(src.dir)) throw ConfigError("data directory not found: " + src.dir.string());
      for (const auto& e : fs::directory_iterator(src.dir))
        if (e.is_regular_file() && e.path().extension() == ".csv" && !is_sidecar(e.path())) logs.push_back(e.path());
      std::sort(logs.begin(), logs.end());
    }
    if (logs.empty()) throw ConfigError("no log files found");

    ParseOptions opts;
    if (!src.mapping.empty()) opts.mapping = ColumnMapping::from_json_file(src.mapping);
    for (const auto& p : logs) {
      std::ifstream in(p);
      if (!in) throw IoError("cannot open " + p.string());
      for (auto& d : read_log_csv(in, registry, opts)) courses.push_back(std::move(d));
    }
  }
  if (apply_min_filter)
    for (auto& d : courses) d = filter_min_responses(d, src.min_responses);
  std::sort(courses.begin(), courses.end(),
            [](const Dataset& a, const Dataset& b) { return a.course_id() < b.course_id(); });
  for (std::size_t i = 1; i < courses.size(); ++i)
    if (courses[i].course_id() == courses[i - 1].course_id())
      throw ConfigError("course " + courses[i].course_id() + " appears in more than one log file");
  return courses;
}

std::string describe(const ExperimentConfig& cfg) {
  const auto& h = cfg.hyper;
  std::ostringstream s;
  s << "eta=" << h.smoothing_eta << " n=" << h.pattern_length << " g=" << h.ghost_attempts
    << " d_F=" << h.decay_failure << " d_R=" << h.decay_recency << " ppe(c,x,b,m)=(" << h.ppe_c << "," << h.ppe_x
    << "," << h.ppe_b << "," << h.ppe_m << ") windows_s=[";
  for (std::size_t i = 0; i < h.windows_s.size(); ++i) s << (i ? "," : "") << h.windows_s[i];
  s << "]\n";
  s << "lambda=" << cfg.lambda << " epochs=" << cfg.train.epochs << " lr=" << cfg.train.learning_rate
    << " batch=" << cfg.train.batch_size << " k=" << cfg.k << " seed=" << cfg.seed << "\n";
  return s.str();
}

}  // namespace ktransfer::cli
