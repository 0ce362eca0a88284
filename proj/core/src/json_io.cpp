#include "json_io.hpp"

#include <cmath>
#include <limits>

#include "ktransfer/errors.hpp"

namespace ktransfer::detail {

namespace {

// JSON has no infinity; the unbounded window is written as the string "inf".
nlohmann::json window_value(double w) { return std::isinf(w) ? nlohmann::json("inf") : nlohmann::json(w); }

double window_from(const nlohmann::json& v) {
  if (v.is_string()) {
    if (v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    throw ConfigError("window must be a number or \"inf\"");
  }
  return v.get<double>();
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

nlohmann::json hyper_to_json(const HyperParams& h) {
  nlohmann::json windows = nlohmann::json::array();
  for (double w : h.windows_s) windows.push_back(window_value(w));
  return {{"smoothing_eta", h.smoothing_eta},   {"pattern_length", h.pattern_length},
          {"ghost_attempts", h.ghost_attempts}, {"decay_failure", h.decay_failure},
          {"decay_recency", h.decay_recency},   {"ppe_c", h.ppe_c},
          {"ppe_x", h.ppe_x},                   {"ppe_b", h.ppe_b},
          {"ppe_m", h.ppe_m},                   {"windows_s", windows},
          {"time_cap_s", h.time_cap_s}};
}

HyperParams hyper_from_json(const nlohmann::json& j, HyperParams h) {
  try {
    read_key(j, "smoothing_eta", h.smoothing_eta);
    read_key(j, "pattern_length", h.pattern_length);
    read_key(j, "ghost_attempts", h.ghost_attempts);
    read_key(j, "decay_failure", h.decay_failure);
    read_key(j, "decay_recency", h.decay_recency);
    read_key(j, "ppe_c", h.ppe_c);
    read_key(j, "ppe_x", h.ppe_x);
    read_key(j, "ppe_b", h.ppe_b);
    read_key(j, "ppe_m", h.ppe_m);
    read_key(j, "time_cap_s", h.time_cap_s);
    if (j.contains("windows_s")) {
      h.windows_s.clear();
      for (const auto& v : j.at("windows_s")) h.windows_s.push_back(window_from(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("hyperparameters: ") + e.what());
  }
  h.validate();
  return h;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},   {"learning_rate", c.learning_rate}, {"beta1", c.beta1},
          {"beta2", c.beta2},     {"epsilon", c.epsilon},             {"batch_size", c.batch_size},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  try {
    read_key(j, "epochs", c.epochs);
    read_key(j, "learning_rate", c.learning_rate);
    read_key(j, "beta1", c.beta1);
    read_key(j, "beta2", c.beta2);
    read_key(j, "epsilon", c.epsilon);
    read_key(j, "batch_size", c.batch_size);
    read_key(j, "seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace ktransfer::detail
