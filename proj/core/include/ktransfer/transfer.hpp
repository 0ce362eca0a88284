#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ktransfer/bkt.hpp"
#include "ktransfer/domain.hpp"
#include "ktransfer/features.hpp"
#include "ktransfer/linmodel.hpp"

namespace ktransfer {

enum class ModelClass : std::uint8_t { logistic, bkt, irt_online, constant };

const char* to_string(ModelClass c);
std::optional<ModelClass> parse_model_class(std::string_view s);

struct ModelSpec {
  std::string name;
  ModelClass kind = ModelClass::logistic;
  ExtractorConfig config;  // used by logistic (and, for A-IRT, its source fit)
  bool agnostic = false;
};

// Presets: irt, pfa, das3h, best-lr, best-lr+, auglr, bkt, always-correct and
// the agnostic a-bkt, a-irt, a-pfa, a-das3h, a-best-lr, a-best-lr+, a-auglr,
// plus the reference rows a-auglr+kc, a-auglr+quest, a-auglr+kc+quest.
const std::vector<ModelSpec>& preset_zoo();
// Case-insensitive lookup; throws ConfigError listing known names.
ModelSpec find_preset(std::string_view name);
std::vector<ModelSpec> conventional_presets();

// JSON: {"hyper": {...}, "models": [{"name", "class", "families", "agnostic"}]}.
// Entries naming a preset with no "families" reuse the preset.
std::vector<ModelSpec> load_model_specs(const std::filesystem::path& path);
std::vector<ModelSpec> model_specs_from_json_text(const std::string& json_text, const std::string& origin = "config");
// Reads the "hyper" object of a JSON document; missing keys keep `base`.
HyperParams hyper_from_json_text(const std::string& json_text, HyperParams base = {});
std::string hyper_to_json_text(const HyperParams& hyper);
// Same for the "train" object.
TrainConfig train_config_from_json_text(const std::string& json_text, TrainConfig base = {});
std::string train_config_to_json_text(const TrainConfig& config);

// A fitted model of any class. Agnostic models are the naive-transfer
// artefact; course-specific ones come from train_model / tune / scratch.
struct FittedModel {
  ModelSpec spec;
  LogisticModel logistic;   // kind == logistic
  BktModel bkt;             // kind == bkt
  double airt_delta = 0.0;  // kind == irt_online
  double airt_step = 0.1;
  double global_correct_rate = 0.5;
  double lambda = 0.0;
  std::vector<std::string> source_courses;
};

using AgnosticModel = FittedModel;
using TargetModel = FittedModel;
using Prediction = std::pair<double, int>;

// Throws ConfigError when spec is not agnostic or sources are empty.
AgnosticModel train_agnostic(const std::vector<const Dataset*>& sources, const ModelSpec& spec,
                             const TrainConfig& config = {});

// Course-specific fit of any spec on one course (reference / pilot models).
FittedModel train_model(const Dataset& dataset, const ModelSpec& spec, const TrainConfig& config = {});

// One prediction per question interaction, students in dataset order.
std::vector<Prediction> predict(const FittedModel& model, const Dataset& dataset);
std::vector<Prediction> apply_agnostic(const AgnosticModel& model, const Dataset& target);

// Course-specific families appended to the agnostic prefix for inductive targets.
const std::vector<Family>& inductive_target_families();
FeatureSchema inductive_target_schema(const AgnosticModel& model, const CourseMeta& target_meta);

// Center (w_S, 0) in target_schema; throws SchemaError when the agnostic
// prefix of target_schema differs from the model's layout.
PriorSpec embed_prior(const AgnosticModel& model, const FeatureSchema& target_schema, double lambda = 5.0);

// I-AugLR when model is A-AugLR. An empty pilot returns the padded model.
TargetModel tune_inductive(const AgnosticModel& model, const Dataset& pilot, double lambda = 5.0,
                           const TrainConfig& config = {});

struct ScratchOptions {
  const FeatureSchema* schema = nullptr;   // default: built from spec and pilot
  const WeightVector* init = nullptr;      // default: zeros
  std::optional<double> global_correct_rate;
};

// Throws ConfigError on an empty pilot.
TargetModel train_scratch(const Dataset& pilot, const ModelSpec& spec, const TrainConfig& config = {},
                          const ScratchOptions& opts = {});

// Global difficulty from a {bias, student} fit on the sources.
double fit_airt_difficulty(const std::vector<const Dataset*>& sources, const TrainConfig& config = {});
// Per-(student, KC) ability a, prediction sigmoid(a - delta), update a += step (y - p).
std::vector<Prediction> predict_online_airt(double delta, const Dataset& target, double step = 0.1);

}  // namespace ktransfer
