#pragma once

#include <filesystem>
#include <iosfwd>

#include "ktransfer/transfer.hpp"

namespace ktransfer {

// Model container, all integers little-endian:
//   bytes 0-3   magic "KTRM"
//   u32         format version (1)
//   u32         model class (0 logistic, 1 bkt, 2 irt-online, 3 constant)
//   u64         manifest length N, then N bytes of UTF-8 JSON
//   u64         schema fingerprint (0 for non-logistic models)
//   u64         weight count D, then D IEEE-754 binary64 weights
// The manifest carries the spec, feature blocks with their ids, the
// hyperparameters, training config, p-bar, lambda, source courses and any
// BKT or A-IRT parameters, which is enough to rebuild the extraction pipeline.
inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(std::ostream& out, const FittedModel& model);
void save_model(const std::filesystem::path& path, const FittedModel& model);
// Throws IoError on a malformed container and SchemaError when the weights do
// not match the rebuilt schema.
FittedModel load_model(std::istream& in);
FittedModel load_model(const std::filesystem::path& path);

}  // namespace ktransfer
