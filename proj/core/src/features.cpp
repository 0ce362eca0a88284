#include "ktransfer/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "ktransfer/errors.hpp"

namespace ktransfer {

double phi(double x) {
  if (!(x >= 0.0)) throw std::domain_error("phi: negative input " + std::to_string(x));
  return std::log1p(x);
}

void HyperParams::validate() const {
  if (!(smoothing_eta > 0)) throw ConfigError("smoothing eta must be positive");
  if (pattern_length < 1) throw ConfigError("response pattern length must be >= 1");
  if (ghost_attempts < 0) throw ConfigError("ghost attempts must be >= 0");
  if (!(decay_failure > 0 && decay_failure <= 1)) throw ConfigError("d_F must lie in (0, 1]");
  if (!(decay_recency > 0 && decay_recency <= 1)) throw ConfigError("d_R must lie in (0, 1]");
  if (!(ppe_c > 0 && ppe_x > 0 && ppe_b > 0 && ppe_m > 0)) throw ConfigError("PPE constants must be positive");
  if (windows_s.empty()) throw ConfigError("at least one time window is required");
  for (std::size_t i = 0; i < windows_s.size(); ++i) {
    if (!(windows_s[i] > 0)) throw ConfigError("time windows must be positive");
    if (i && !(windows_s[i] > windows_s[i - 1])) throw ConfigError("time windows must be increasing");
  }
  if (!(time_cap_s > 0)) throw ConfigError("time cap must be positive");
}

namespace {

constexpr std::array<const char*, kFamilyCount> kFamilyNames = {
    "bias",           "student_onehot",    "total_counts",      "kc_counts_shared", "time_window_shared",
    "rpfa",           "ppe",               "response_pattern",  "smoothed_correctness", "lag_time",
    "response_time",  "context_onehot",    "context_counts",    "difficulty_onehot", "difficulty_counts",
    "prereq_counts",  "postreq_counts",    "video_counts",      "reading_counts",   "question_onehot",
    "kc_onehot",      "kc_counts",         "time_window_kc",
};

std::size_t fidx(Family f) { return static_cast<std::size_t>(f); }

}  // namespace

const char* family_name(Family f) { return kFamilyNames[fidx(f)]; }

std::optional<Family> parse_family(std::string_view name) {
  for (std::size_t i = 0; i < kFamilyNames.size(); ++i)
    if (name == kFamilyNames[i]) return static_cast<Family>(i);
  return std::nullopt;
}

bool is_agnostic(Family f) { return fidx(f) < fidx(Family::question_onehot); }

ExtractorConfig::ExtractorConfig(std::vector<Family> fams, HyperParams h) : families(std::move(fams)), hyper(std::move(h)) {
  std::sort(families.begin(), families.end());
  families.erase(std::unique(families.begin(), families.end()), families.end());
}

ExtractorConfig ExtractorConfig::from_names(const std::vector<std::string>& names, HyperParams h) {
  std::vector<Family> fams;
  for (const auto& n : names) {
    auto f = parse_family(n);
    if (!f) throw ConfigError("unknown feature family '" + n + "'");
    fams.push_back(*f);
  }
  return ExtractorConfig(std::move(fams), std::move(h));
}

bool ExtractorConfig::has(Family f) const { return std::binary_search(families.begin(), families.end(), f); }

bool ExtractorConfig::agnostic() const {
  return std::all_of(families.begin(), families.end(), [](Family f) { return is_agnostic(f); });
}

ExtractorConfig ExtractorConfig::with(std::initializer_list<Family> extra) const {
  auto fams = families;
  fams.insert(fams.end(), extra.begin(), extra.end());
  return ExtractorConfig(std::move(fams), hyper);
}

std::vector<std::string> ExtractorConfig::names() const {
  std::vector<std::string> out;
  for (auto f : families) out.emplace_back(family_name(f));
  return out;
}

FeatureSchema::FeatureSchema(std::vector<FeatureBlock> blocks, HyperParams hyper)
    : blocks_(std::move(blocks)), hyper_(std::move(hyper)) {
  by_family_.fill(-1);
  index_.resize(blocks_.size());
  std::size_t off = 0;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& blk = blocks_[b];
    if (blk.offset != off) throw SchemaError("block offsets are not contiguous");
    if (by_family_[fidx(blk.family)] != -1)
      throw SchemaError(std::string("duplicate block ") + family_name(blk.family));
    by_family_[fidx(blk.family)] = static_cast<int>(b);
    for (std::size_t i = 0; i < blk.ids.size(); ++i) index_[b].emplace(blk.ids[i], i);
    off += blk.size;
  }
  dim_ = off;
}

const FeatureBlock* FeatureSchema::block(Family f) const {
  int b = by_family_[fidx(f)];
  return b < 0 ? nullptr : &blocks_[static_cast<std::size_t>(b)];
}

std::optional<std::size_t> FeatureSchema::lookup(Family f, const std::string& id) const {
  int b = by_family_[fidx(f)];
  if (b < 0) return std::nullopt;
  const auto& m = index_[static_cast<std::size_t>(b)];
  auto it = m.find(id);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

std::vector<FeatureBlock> FeatureSchema::agnostic_blocks() const {
  std::vector<FeatureBlock> out;
  for (const auto& b : blocks_)
    if (b.agnostic) out.push_back(b);
  return out;
}

std::size_t FeatureSchema::agnostic_dim() const {
  std::size_t d = 0;
  for (const auto& b : blocks_)
    if (b.agnostic) d += b.size;
  return d;
}

bool FeatureSchema::agnostic_only() const {
  return std::all_of(blocks_.begin(), blocks_.end(), [](const FeatureBlock& b) { return b.agnostic; });
}

std::uint64_t FeatureSchema::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (const auto& b : blocks_) {
    feed(family_name(b.family));
    feed(std::to_string(b.offset));
    feed(std::to_string(b.size));
    feed(b.agnostic ? "A" : "T");
    for (const auto& id : b.ids) feed(id);
  }
  return h;
}

std::vector<Family> FeatureSchema::families() const {
  std::vector<Family> out;
  for (const auto& b : blocks_) out.push_back(b.family);
  return out;
}

std::string student_key(std::string_view course_id, std::string_view student_id) {
  std::string k;
  k.reserve(course_id.size() + student_id.size() + 1);
  k.append(course_id);
  k.push_back('\x1f');
  k.append(student_id);
  return k;
}

namespace {

FeatureBlock make_block(Family f, std::size_t offset, const HyperParams& hyper, const CourseMeta* meta,
                        const std::vector<std::string>& roster) {
  FeatureBlock b;
  b.family = f;
  b.offset = offset;
  b.agnostic = is_agnostic(f);
  const std::size_t W = hyper.windows_s.size();
  auto need_meta = [&] {
    if (!meta) throw ConfigError(std::string("family ") + family_name(f) + " needs course metadata");
  };
  switch (f) {
    case Family::bias:
    case Family::ppe:
    case Family::smoothed_correctness:
    case Family::lag_time:
    case Family::response_time:
    case Family::video_counts:
    case Family::reading_counts: b.size = 1; break;
    case Family::total_counts:
    case Family::kc_counts_shared:
    case Family::rpfa:
    case Family::prereq_counts:
    case Family::postreq_counts: b.size = 2; break;
    case Family::time_window_shared: b.size = 2 * W; break;
    case Family::response_pattern: b.size = 2 * static_cast<std::size_t>(hyper.pattern_length); break;
    case Family::context_onehot: b.size = kContextCount; break;
    case Family::context_counts: b.size = 2 * kContextCount; break;
    case Family::difficulty_onehot: b.size = kDifficultyBuckets; break;
    case Family::difficulty_counts: b.size = 2 * kDifficultyBuckets; break;
    case Family::student_onehot: {
      std::set<std::string> seen;
      for (const auto& k : roster)
        if (seen.insert(k).second) b.ids.push_back(k);
      b.size = b.ids.size();
      break;
    }
    case Family::question_onehot:
      need_meta();
      for (const auto& [q, _] : meta->questions) b.ids.push_back(q);
      b.size = b.ids.size();
      break;
    case Family::kc_onehot:
    case Family::kc_counts:
    case Family::time_window_kc: {
      need_meta();
      b.ids.assign(meta->kcs.begin(), meta->kcs.end());
      const std::size_t per = f == Family::kc_onehot ? 1 : f == Family::kc_counts ? 2 : 2 * W;
      b.size = per * b.ids.size();
      break;
    }
  }
  return b;
}

}  // namespace

FeatureSchema build_schema(const ExtractorConfig& config, const CourseMeta* course_meta,
                           const std::vector<std::string>& training_student_keys) {
  config.hyper.validate();
  std::vector<FeatureBlock> blocks;
  std::size_t off = 0;
  for (Family f : config.families) {
    blocks.push_back(make_block(f, off, config.hyper, course_meta, training_student_keys));
    off += blocks.back().size;
  }
  return FeatureSchema(std::move(blocks), config.hyper);
}

FeatureSchema extend_schema(const FeatureSchema& agnostic, const std::vector<Family>& extra,
                            const CourseMeta& course_meta) {
  auto blocks = agnostic.agnostic_blocks();
  std::size_t off = 0;
  for (auto& b : blocks) {
    b.offset = off;
    off += b.size;
  }
  std::vector<Family> fams(extra);
  std::sort(fams.begin(), fams.end());
  fams.erase(std::unique(fams.begin(), fams.end()), fams.end());
  for (Family f : fams) {
    if (is_agnostic(f)) {
      if (agnostic.has(f)) continue;
      throw SchemaError(std::string("cannot add agnostic family ") + family_name(f) + " to a pre-trained layout");
    }
    blocks.push_back(make_block(f, off, agnostic.hyper(), &course_meta, {}));
    off += blocks.back().size;
  }
  return FeatureSchema(std::move(blocks), agnostic.hyper());
}

void RollingState::update(const Interaction& x) {
  if (last_timestamp && x.timestamp < *last_timestamp)
    throw SequencingError("interaction at " + std::to_string(x.timestamp) + " precedes previous at " +
                          std::to_string(*last_timestamp));
  last_timestamp = x.timestamp;
  switch (x.activity) {
    case Activity::video: ++videos; return;
    case Activity::reading: ++readings; return;
    case Activity::question: break;
  }
  const bool ok = x.correct.value_or(0) != 0;
  const int slot = ok ? 0 : 1;
  (ok ? correct : incorrect) += 1;
  for (const auto& k : x.kc_ids) {
    auto& t = kc[k];
    (ok ? t.correct : t.incorrect) += 1;
    t.times.push_back(x.timestamp);
    t.outcomes.push_back(ok ? 1 : 0);
  }
  if (x.difficulty_rating) difficulty[difficulty_bucket(*x.difficulty_rating)][slot] += 1;
  if (x.context < kContextCount) context[x.context][slot] += 1;
  recent.push_back(ok ? 1 : 0);
  while (recent.size() > pattern_capacity) recent.pop_front();
  prev_response_time_ms = x.response_time_ms;
}

const KcTrace* RollingState::trace(const std::string& kc_id) const {
  auto it = kc.find(kc_id);
  return it == kc.end() ? nullptr : &it->second;
}

RollingState update_state(RollingState state, const Interaction& interaction) {
  state.update(interaction);
  return state;
}

std::size_t difficulty_bucket(int rating) {
  int r = static_cast<int>(std::lround(rating / 10.0)) * 10;
  r = std::clamp(r, kMinDifficulty, kMaxDifficulty);
  return static_cast<std::size_t>(r / 10 - 1);
}

std::vector<std::pair<double, double>> time_window_counts(std::span<const std::int64_t> times,
                                                          std::span<const std::uint8_t> outcomes, std::int64_t now,
                                                          std::span<const double> windows) {
  std::vector<std::uint32_t> attempts(windows.size(), 0), wins(windows.size(), 0);
  for (std::size_t e = 0; e < times.size(); ++e) {
    const double age = static_cast<double>(now - times[e]);
    for (std::size_t w = 0; w < windows.size(); ++w) {
      if (age <= windows[w]) {
        ++attempts[w];
        if (outcomes[e]) ++wins[w];
      }
    }
  }
  std::vector<std::pair<double, double>> out(windows.size());
  for (std::size_t w = 0; w < windows.size(); ++w) out[w] = {phi(attempts[w]), phi(wins[w])};
  return out;
}

RpfaValues rpfa_features(std::span<const std::uint8_t> outcomes, double decay_failure, double decay_recency,
                         int ghost_attempts) {
  RpfaValues r;
  double wf = 1.0;
  for (auto it = outcomes.rbegin(); it != outcomes.rend(); ++it, wf *= decay_failure)
    if (!*it) r.failures += wf;

  double num = 0.0, den = 0.0, w = 1.0;
  for (auto it = outcomes.rbegin(); it != outcomes.rend(); ++it, w *= decay_recency) {
    num += w * (*it ? 1.0 : 0.0);
    den += w;
  }
  for (int g = 0; g < ghost_attempts; ++g, w *= decay_recency) den += w;
  r.recency = den > 0.0 ? num / den : 0.0;
  return r;
}

double ppe_feature(std::span<const std::int64_t> attempt_times, std::int64_t now, double c, double x, double b,
                   double m) {
  const std::size_t n = attempt_times.size();
  if (n == 0) return 0.0;
  // Ages below one second are treated as one second so the power weights stay finite.
  auto age = [&](std::int64_t t) { return std::max(1.0, static_cast<double>(now - t)); };
  double wsum = 0.0;
  for (auto t : attempt_times) wsum += std::pow(age(t), -x);
  double T = 0.0;
  for (auto t : attempt_times) T += std::pow(age(t), -x) / wsum * age(t);

  double d = b + m;
  if (n > 1) {
    double acc = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      const double gap = static_cast<double>(attempt_times[i] - attempt_times[i - 1]);
      acc += 1.0 / std::log(gap + std::exp(1.0));
    }
    d = b + m * acc / static_cast<double>(n - 1);
  }
  return c * std::pow(static_cast<double>(n), x) * std::pow(T, -d);
}

std::vector<double> response_pattern(std::span<const std::uint8_t> outcomes_oldest_first, int n) {
  if (n < 1) throw ConfigError("response pattern length must be >= 1");
  std::vector<double> out(2 * static_cast<std::size_t>(n), 0.0);
  std::size_t pos = 0;
  for (auto it = outcomes_oldest_first.rbegin(); it != outcomes_oldest_first.rend() && pos < static_cast<std::size_t>(n);
       ++it, ++pos)
    out[2 * pos + (*it ? 0 : 1)] = 1.0;
  return out;
}

std::pair<double, double> lag_response_time_features(std::optional<std::int64_t> prev_response_time_ms,
                                                     std::optional<std::int64_t> lag_time_ms, double cap_s) {
  auto f = [&](std::optional<std::int64_t> ms) {
    if (!ms) return 0.0;
    return phi(std::min(cap_s, std::max(0.0, static_cast<double>(*ms) / 1000.0)));
  };
  return {f(prev_response_time_ms), f(lag_time_ms)};
}

CourseGraph::CourseGraph(const CourseMeta& meta) {
  for (const auto& [from, to] : meta.kc_prereq_edges) {
    pre_[to].push_back(from);
    post_[from].push_back(to);
  }
}

const std::vector<std::string>& CourseGraph::prereqs(const std::string& kc) const {
  static const std::vector<std::string> none;
  auto it = pre_.find(kc);
  return it == pre_.end() ? none : it->second;
}

const std::vector<std::string>& CourseGraph::postreqs(const std::string& kc) const {
  static const std::vector<std::string> none;
  auto it = post_.find(kc);
  return it == post_.end() ? none : it->second;
}

FeatureExtractor::FeatureExtractor(const FeatureSchema& schema, double global_correct_rate, const CourseMeta* course)
    : schema_(schema), p_bar_(global_correct_rate) {
  if (course) graph_.emplace(*course);
}

void FeatureExtractor::emit(const RollingState& st, const Interaction& next, std::string_view skey,
                            SparseBuilder& out) const {
  const auto& hyper = schema_.hyper();
  const std::size_t W = hyper.windows_s.size();
  const std::int64_t now = next.timestamp;
  static const std::vector<std::int64_t> no_times;
  static const std::vector<std::uint8_t> no_outcomes;

  for (const auto& blk : schema_.blocks()) {
    const std::size_t o = blk.offset;
    switch (blk.family) {
      case Family::bias: out.add(o, 1.0); break;
      case Family::student_onehot:
        if (auto i = schema_.lookup(blk.family, std::string(skey))) out.add(o + *i, 1.0);
        break;
      case Family::total_counts:
        out.add(o, phi(st.correct));
        out.add(o + 1, phi(st.incorrect));
        break;
      case Family::kc_counts_shared:
        for (const auto& k : next.kc_ids)
          if (const auto* t = st.trace(k)) {
            out.add(o, phi(t->correct));
            out.add(o + 1, phi(t->incorrect));
          }
        break;
      case Family::time_window_shared:
        for (const auto& k : next.kc_ids)
          if (const auto* t = st.trace(k)) {
            auto tw = time_window_counts(t->times, t->outcomes, now, hyper.windows_s);
            for (std::size_t w = 0; w < W; ++w) {
              out.add(o + 2 * w, tw[w].first);
              out.add(o + 2 * w + 1, tw[w].second);
            }
          }
        break;
      case Family::rpfa:
        for (const auto& k : next.kc_ids) {
          const auto* t = st.trace(k);
          auto r = rpfa_features(t ? std::span<const std::uint8_t>(t->outcomes) : std::span<const std::uint8_t>(no_outcomes),
                                 hyper.decay_failure, hyper.decay_recency, hyper.ghost_attempts);
          out.add(o, r.failures);
          out.add(o + 1, r.recency);
        }
        break;
      case Family::ppe:
        for (const auto& k : next.kc_ids)
          if (const auto* t = st.trace(k))
            out.add(o, ppe_feature(t->times, now, hyper.ppe_c, hyper.ppe_x, hyper.ppe_b, hyper.ppe_m));
        break;
      case Family::response_pattern: {
        std::vector<std::uint8_t> recent(st.recent.begin(), st.recent.end());
        auto pat = response_pattern(recent, hyper.pattern_length);
        for (std::size_t i = 0; i < pat.size(); ++i) out.add(o + i, pat[i]);
        break;
      }
      case Family::smoothed_correctness: {
        const double c = st.correct, f = st.incorrect, eta = hyper.smoothing_eta;
        out.add(o, (c + eta * p_bar_) / (c + f + eta));
        break;
      }
      case Family::lag_time:
        out.add(o, lag_response_time_features(std::nullopt, next.lag_time_ms, hyper.time_cap_s).second);
        break;
      case Family::response_time:
        out.add(o, lag_response_time_features(st.prev_response_time_ms, std::nullopt, hyper.time_cap_s).first);
        break;
      case Family::context_onehot:
        if (next.context < kContextCount) out.add(o + next.context, 1.0);
        break;
      case Family::context_counts:
        for (std::size_t c = 0; c < kContextCount; ++c) {
          out.add(o + 2 * c, phi(st.context[c][0]));
          out.add(o + 2 * c + 1, phi(st.context[c][1]));
        }
        break;
      case Family::difficulty_onehot:
        if (next.difficulty_rating) out.add(o + difficulty_bucket(*next.difficulty_rating), 1.0);
        break;
      case Family::difficulty_counts:
        for (std::size_t b = 0; b < kDifficultyBuckets; ++b) {
          out.add(o + 2 * b, phi(st.difficulty[b][0]));
          out.add(o + 2 * b + 1, phi(st.difficulty[b][1]));
        }
        break;
      case Family::prereq_counts:
      case Family::postreq_counts: {
        if (!graph_) break;
        std::set<std::string> related;
        for (const auto& k : next.kc_ids) {
          const auto& rel = blk.family == Family::prereq_counts ? graph_->prereqs(k) : graph_->postreqs(k);
          related.insert(rel.begin(), rel.end());
        }
        std::uint64_t c = 0, f = 0;
        for (const auto& k : related)
          if (const auto* t = st.trace(k)) {
            c += t->correct;
            f += t->incorrect;
          }
        out.add(o, phi(static_cast<double>(c)));
        out.add(o + 1, phi(static_cast<double>(f)));
        break;
      }
      case Family::video_counts: out.add(o, phi(st.videos)); break;
      case Family::reading_counts: out.add(o, phi(st.readings)); break;
      case Family::question_onehot:
        if (next.question_id)
          if (auto i = schema_.lookup(blk.family, *next.question_id)) out.add(o + *i, 1.0);
        break;
      case Family::kc_onehot:
        for (const auto& k : next.kc_ids)
          if (auto i = schema_.lookup(blk.family, k)) out.add(o + *i, 1.0);
        break;
      case Family::kc_counts:
        for (const auto& k : next.kc_ids) {
          auto i = schema_.lookup(blk.family, k);
          const auto* t = st.trace(k);
          if (!i || !t) continue;
          out.add(o + 2 * *i, phi(t->correct));
          out.add(o + 2 * *i + 1, phi(t->incorrect));
        }
        break;
      case Family::time_window_kc:
        for (const auto& k : next.kc_ids) {
          auto i = schema_.lookup(blk.family, k);
          const auto* t = st.trace(k);
          if (!i || !t) continue;
          auto tw = time_window_counts(t->times, t->outcomes, now, hyper.windows_s);
          const std::size_t base = o + 2 * W * *i;
          for (std::size_t w = 0; w < W; ++w) {
            out.add(base + 2 * w, tw[w].first);
            out.add(base + 2 * w + 1, tw[w].second);
          }
        }
        break;
    }
  }
}

SparseVector FeatureExtractor::extract(const RollingState& state, const Interaction& next,
                                       std::string_view skey) const {
  SparseBuilder b(schema_.dim());
  emit(state, next, skey, b);
  return b.finish();
}

std::vector<std::pair<SparseVector, int>> FeatureExtractor::extract_sequence(const StudentHistory& history) const {
  std::vector<std::pair<SparseVector, int>> out;
  auto st = fresh_state();
  const auto skey = student_key(history.course_id, history.student_id);
  for (const auto& x : history.interactions) {
    if (x.is_question()) out.emplace_back(extract(st, x, skey), x.correct.value_or(0));
    st.update(x);
  }
  return out;
}

void FeatureExtractor::append_sequence(const StudentHistory& history, Design& design) const {
  if (design.dim() != schema_.dim()) throw SchemaError("design dimension does not match schema");
  auto st = fresh_state();
  const auto skey = student_key(history.course_id, history.student_id);
  SparseBuilder b(schema_.dim());
  for (const auto& x : history.interactions) {
    if (x.is_question()) {
      emit(st, x, skey, b);
      auto v = b.finish();
      design.add_row(v, x.correct.value_or(0));
    }
    st.update(x);
  }
}

Design FeatureExtractor::design(const Dataset& dataset) const {
  Design d(schema_.dim());
  d.reserve(dataset.question_interaction_count(), dataset.question_interaction_count() * 16);
  for (const auto& h : dataset.histories()) append_sequence(h, d);
  return d;
}

double global_correct_rate(const std::vector<const Dataset*>& datasets) {
  std::uint64_t n = 0, c = 0;
  for (const auto* ds : datasets)
    for (const auto& h : ds->histories())
      for (const auto& x : h.interactions)
        if (x.is_question()) {
          ++n;
          c += x.correct.value_or(0);
        }
  return n ? static_cast<double>(c) / static_cast<double>(n) : 0.5;
}

}  // namespace ktransfer
