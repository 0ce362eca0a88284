#pragma once

#include <nlohmann/json.hpp>

#include "ktransfer/features.hpp"
#include "ktransfer/linmodel.hpp"

namespace ktransfer::detail {

nlohmann::json hyper_to_json(const HyperParams& h);
// Missing keys keep the value from `base`.
HyperParams hyper_from_json(const nlohmann::json& j, HyperParams base = {});

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

}  // namespace ktransfer::detail
