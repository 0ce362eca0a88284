#include "ktransfer/model_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "json_io.hpp"
#include "ktransfer/errors.hpp"

namespace ktransfer {

namespace {

constexpr std::array<char, 4> kMagic = {'K', 'T', 'R', 'M'};

template <class T>
void put_le(std::ostream& out, T v) {
  static_assert(std::is_unsigned_v<T>);
  std::array<char, sizeof(T)> b{};
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b.data(), b.size());
}

template <class T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) throw IoError("model file truncated");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
  return v;
}

std::uint32_t class_code(ModelClass c) { return static_cast<std::uint32_t>(c); }

nlohmann::json bkt_json(const BktParams& p) {
  return {{"p_init", p.p_init}, {"p_transit", p.p_transit}, {"p_guess", p.p_guess}, {"p_slip", p.p_slip}};
}

BktParams bkt_from(const nlohmann::json& j) {
  return {j.at("p_init").get<double>(), j.at("p_transit").get<double>(), j.at("p_guess").get<double>(),
          j.at("p_slip").get<double>()};
}

nlohmann::json manifest(const FittedModel& m) {
  nlohmann::json j;
  j["name"] = m.spec.name;
  j["class"] = to_string(m.spec.kind);
  j["agnostic"] = m.spec.agnostic;
  j["families"] = m.spec.config.names();
  j["hyper"] = detail::hyper_to_json(m.spec.config.hyper);
  j["global_correct_rate"] = m.global_correct_rate;
  j["lambda"] = m.lambda;
  j["source_courses"] = m.source_courses;
  if (m.spec.kind == ModelClass::logistic) {
    const auto& lm = m.logistic;
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : lm.schema.blocks())
      blocks.push_back({{"family", family_name(b.family)},
                        {"offset", b.offset},
                        {"size", b.size},
                        {"agnostic", b.agnostic},
                        {"ids", b.ids}});
    j["schema"] = {{"blocks", blocks}, {"hyper", detail::hyper_to_json(lm.schema.hyper())}};
    j["logistic"] = {{"name", lm.name},
                     {"global_correct_rate", lm.global_correct_rate},
                     {"lambda", lm.lambda},
                     {"source_courses", lm.source_courses},
                     {"train_config", detail::train_config_to_json(lm.train_config)}};
  }
  if (m.spec.kind == ModelClass::bkt) {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [k, p] : m.bkt.per_kc) per[k] = bkt_json(p);
    j["bkt"] = {{"shared", bkt_json(m.bkt.shared)}, {"per_kc", per}};
  }
  if (m.spec.kind == ModelClass::irt_online) j["airt"] = {{"delta", m.airt_delta}, {"step", m.airt_step}};
  return j;
}

}  // namespace

void save_model(std::ostream& out, const FittedModel& model) {
  const std::string text = manifest(model).dump();
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kModelFormatVersion);
  put_le<std::uint32_t>(out, class_code(model.spec.kind));
  put_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const bool lin = model.spec.kind == ModelClass::logistic;
  put_le<std::uint64_t>(out, lin ? model.logistic.weights.fingerprint : 0);
  const auto& w = model.logistic.weights.values;
  put_le<std::uint64_t>(out, lin ? w.size() : 0);
  if (lin)
    for (double v : w) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw IoError("failed to write model");
}

void save_model(const std::filesystem::path& path, const FittedModel& model) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  save_model(out, model);
}

FittedModel load_model(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw IoError("not a model file (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kModelFormatVersion) throw IoError("unsupported model format version " + std::to_string(version));
  const auto code = get_le<std::uint32_t>(in);
  if (code > class_code(ModelClass::constant)) throw IoError("unknown model class code");
  const auto len = get_le<std::uint64_t>(in);
  if (len > (1ull << 32)) throw IoError("model manifest too large");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw IoError("model file truncated");
  const auto fingerprint = get_le<std::uint64_t>(in);
  const auto dim = get_le<std::uint64_t>(in);
  if (dim > (1ull << 32)) throw IoError("weight count too large");
  std::vector<double> w(dim);
  for (auto& v : w) v = std::bit_cast<double>(get_le<std::uint64_t>(in));

  FittedModel m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.spec.name = j.at("name").get<std::string>();
    m.spec.kind = static_cast<ModelClass>(code);
    if (j.at("class").get<std::string>() != to_string(m.spec.kind)) throw IoError("model class mismatch");
    m.spec.agnostic = j.at("agnostic").get<bool>();
    m.spec.config = ExtractorConfig::from_names(j.at("families").get<std::vector<std::string>>(),
                                                detail::hyper_from_json(j.at("hyper")));
    m.global_correct_rate = j.at("global_correct_rate").get<double>();
    m.lambda = j.at("lambda").get<double>();
    m.source_courses = j.at("source_courses").get<std::vector<std::string>>();
    if (m.spec.kind == ModelClass::logistic) {
      std::vector<FeatureBlock> blocks;
      for (const auto& b : j.at("schema").at("blocks")) {
        auto fam = parse_family(b.at("family").get<std::string>());
        if (!fam) throw IoError("unknown feature family in model manifest");
        blocks.push_back({*fam, b.at("offset").get<std::size_t>(), b.at("size").get<std::size_t>(),
                          b.at("agnostic").get<bool>(), b.at("ids").get<std::vector<std::string>>()});
      }
      auto& lm = m.logistic;
      lm.schema = FeatureSchema(std::move(blocks), detail::hyper_from_json(j.at("schema").at("hyper")));
      const auto& l = j.at("logistic");
      lm.name = l.at("name").get<std::string>();
      lm.global_correct_rate = l.at("global_correct_rate").get<double>();
      lm.lambda = l.at("lambda").get<double>();
      lm.source_courses = l.at("source_courses").get<std::vector<std::string>>();
      lm.train_config = detail::train_config_from_json(l.at("train_config"));
      lm.weights = WeightVector(std::move(w), fingerprint);
      if (lm.weights.dim() != lm.schema.dim())
        throw SchemaError("model has " + std::to_string(lm.weights.dim()) + " weights, schema needs " +
                          std::to_string(lm.schema.dim()));
      if (lm.schema.fingerprint() != fingerprint) throw SchemaError("schema fingerprint mismatch in model file");
    } else if (dim != 0) {
      throw IoError("non-logistic model carries weights");
    }
    if (m.spec.kind == ModelClass::bkt) {
      m.bkt.shared = bkt_from(j.at("bkt").at("shared"));
      for (const auto& [k, p] : j.at("bkt").at("per_kc").items()) m.bkt.per_kc[k] = bkt_from(p);
    }
    if (m.spec.kind == ModelClass::irt_online) {
      m.airt_delta = j.at("airt").at("delta").get<double>();
      m.airt_step = j.at("airt").at("step").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("model manifest: ") + e.what());
  }
  return m;
}

FittedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load_model(in);
}

}  // namespace ktransfer
