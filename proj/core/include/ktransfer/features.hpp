#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <initializer_list>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ktransfer/domain.hpp"
#include "ktransfer/sparse.hpp"

namespace ktransfer {

// phi(x) = log(1 + x); throws std::domain_error for x < 0.
double phi(double x);

struct HyperParams {
  double smoothing_eta = 5.0;
  int pattern_length = 10;
  int ghost_attempts = 3;
  double decay_failure = 0.8;
  double decay_recency = 0.8;
  double ppe_c = 1.0;
  double ppe_x = 0.6;
  double ppe_b = 0.01;
  double ppe_m = 0.028;
  // DAS3H windows in seconds; the last one is unbounded.
  std::vector<double> windows_s = {3600.0, 86400.0, 7 * 86400.0, 30 * 86400.0,
                                   std::numeric_limits<double>::infinity()};
  double time_cap_s = 604800.0;

  void validate() const;
  bool operator==(const HyperParams&) const = default;
};

// Feature families. Agnostic families come first so every schema starts
// with its course-agnostic prefix.
enum class Family : std::uint8_t {
  bias,
  student_onehot,
  total_counts,
  kc_counts_shared,
  time_window_shared,
  rpfa,
  ppe,
  response_pattern,
  smoothed_correctness,
  lag_time,
  response_time,
  context_onehot,
  context_counts,
  difficulty_onehot,
  difficulty_counts,
  prereq_counts,
  postreq_counts,
  video_counts,
  reading_counts,
  // course-specific
  question_onehot,
  kc_onehot,
  kc_counts,
  time_window_kc,
};

inline constexpr std::size_t kFamilyCount = static_cast<std::size_t>(Family::time_window_kc) + 1;
inline constexpr std::size_t kDifficultyBuckets = 9;

const char* family_name(Family f);
std::optional<Family> parse_family(std::string_view name);
bool is_agnostic(Family f);

struct ExtractorConfig {
  std::vector<Family> families;  // kept sorted and unique
  HyperParams hyper;

  ExtractorConfig() = default;
  ExtractorConfig(std::vector<Family> fams, HyperParams h = {});
  // Throws ConfigError on an unknown family name.
  static ExtractorConfig from_names(const std::vector<std::string>& names, HyperParams h = {});

  bool has(Family f) const;
  bool agnostic() const;
  ExtractorConfig with(std::initializer_list<Family> extra) const;
  std::vector<std::string> names() const;
};

struct FeatureBlock {
  Family family = Family::bias;
  std::size_t offset = 0;
  std::size_t size = 0;
  bool agnostic = true;
  // Identity list for one-hot and per-KC families; empty otherwise.
  std::vector<std::string> ids;

  bool operator==(const FeatureBlock& o) const {
    return family == o.family && offset == o.offset && size == o.size && agnostic == o.agnostic && ids == o.ids;
  }
};

class FeatureSchema {
 public:
  FeatureSchema() = default;
  FeatureSchema(std::vector<FeatureBlock> blocks, HyperParams hyper);

  std::size_t dim() const { return dim_; }
  const std::vector<FeatureBlock>& blocks() const { return blocks_; }
  const HyperParams& hyper() const { return hyper_; }
  const FeatureBlock* block(Family f) const;
  bool has(Family f) const { return block(f) != nullptr; }

  // Position of id inside the block, if any.
  std::optional<std::size_t> lookup(Family f, const std::string& id) const;

  // Blocks flagged agnostic, in layout order.
  std::vector<FeatureBlock> agnostic_blocks() const;
  std::size_t agnostic_dim() const;
  bool agnostic_only() const;

  std::uint64_t fingerprint() const;
  std::vector<Family> families() const;

  bool operator==(const FeatureSchema& o) const { return blocks_ == o.blocks_ && hyper_ == o.hyper_; }

 private:
  std::vector<FeatureBlock> blocks_;
  HyperParams hyper_;
  std::size_t dim_ = 0;
  std::array<int, kFamilyCount> by_family_{};
  std::vector<std::unordered_map<std::string, std::size_t>> index_;
};

// Key used by the student block; includes the course so ids from different
// courses never collide.
std::string student_key(std::string_view course_id, std::string_view student_id);

// course_meta may be null when the config has no course-specific family.
FeatureSchema build_schema(const ExtractorConfig& config, const CourseMeta* course_meta,
                           const std::vector<std::string>& training_student_keys);

// Schema made of `agnostic` followed by course-specific blocks from `extra`
// sized from course_meta. Used for inductive targets.
FeatureSchema extend_schema(const FeatureSchema& agnostic, const std::vector<Family>& extra,
                            const CourseMeta& course_meta);

struct KcTrace {
  std::uint32_t correct = 0;
  std::uint32_t incorrect = 0;
  std::vector<std::int64_t> times;
  std::vector<std::uint8_t> outcomes;
  bool operator==(const KcTrace&) const = default;
};

// Everything the extractor needs to know about a student's prefix.
struct RollingState {
  explicit RollingState(std::size_t pattern_capacity = 10) : pattern_capacity(pattern_capacity) {}

  std::uint32_t correct = 0;
  std::uint32_t incorrect = 0;
  std::unordered_map<std::string, KcTrace> kc;
  std::array<std::array<std::uint32_t, 2>, kDifficultyBuckets> difficulty{};  // [bucket][correct, incorrect]
  std::array<std::array<std::uint32_t, 2>, kContextCount> context{};
  std::deque<std::uint8_t> recent;  // oldest first, at most pattern_capacity
  std::size_t pattern_capacity;
  std::uint32_t videos = 0;
  std::uint32_t readings = 0;
  std::optional<std::int64_t> last_timestamp;
  std::optional<std::int64_t> prev_response_time_ms;

  // Throws SequencingError if the timestamp goes backwards.
  void update(const Interaction& x);
  const KcTrace* trace(const std::string& kc_id) const;

  bool operator==(const RollingState&) const = default;
};

RollingState update_state(RollingState state, const Interaction& interaction);

// Rating rounded to the nearest multiple of ten and clamped to [10, 90]; returns 0..8.
std::size_t difficulty_bucket(int rating);

// Per-window (phi(attempts), phi(wins)); an event is inside window w when now - t <= w.
std::vector<std::pair<double, double>> time_window_counts(std::span<const std::int64_t> times,
                                                          std::span<const std::uint8_t> outcomes, std::int64_t now,
                                                          std::span<const double> windows);

struct RpfaValues {
  double failures = 0.0;  // decayed failure count
  double recency = 0.0;   // recency-weighted success proportion with ghost failures
};
// outcomes ordered oldest first.
RpfaValues rpfa_features(std::span<const std::uint8_t> outcomes, double decay_failure, double decay_recency,
                         int ghost_attempts);

// attempt_times ascending, in seconds.
double ppe_feature(std::span<const std::int64_t> attempt_times, std::int64_t now, double c, double x, double b,
                   double m);

// 2n indicators: [correct@1, incorrect@1, correct@2, ...], position 1 = most recent.
std::vector<double> response_pattern(std::span<const std::uint8_t> outcomes_oldest_first, int n);

// (phi(prior response seconds), phi(lag seconds)), each capped at cap_s; absent -> 0.
std::pair<double, double> lag_response_time_features(std::optional<std::int64_t> prev_response_time_ms,
                                                     std::optional<std::int64_t> lag_time_ms,
                                                     double cap_s = 604800.0);

// Direct prerequisite / postrequisite lookup for a course.
class CourseGraph {
 public:
  CourseGraph() = default;
  explicit CourseGraph(const CourseMeta& meta);
  const std::vector<std::string>& prereqs(const std::string& kc) const;
  const std::vector<std::string>& postreqs(const std::string& kc) const;

 private:
  std::unordered_map<std::string, std::vector<std::string>> pre_, post_;
};

// Binds a schema to the per-course context needed at extraction time.
class FeatureExtractor {
 public:
  FeatureExtractor(const FeatureSchema& schema, double global_correct_rate, const CourseMeta* course = nullptr);

  const FeatureSchema& schema() const { return schema_; }
  double global_correct_rate() const { return p_bar_; }

  // Features for answering `next` given the prefix summarised by `state`.
  // Time-based features are evaluated at next.timestamp.
  SparseVector extract(const RollingState& state, const Interaction& next, std::string_view student_key) const;

  // One (features, label) pair per question interaction, strict-prefix features.
  std::vector<std::pair<SparseVector, int>> extract_sequence(const StudentHistory& history) const;
  void append_sequence(const StudentHistory& history, Design& out) const;
  Design design(const Dataset& dataset) const;

  RollingState fresh_state() const { return RollingState(static_cast<std::size_t>(schema_.hyper().pattern_length)); }

 private:
  void emit(const RollingState& state, const Interaction& next, std::string_view student_key,
            SparseBuilder& b) const;

  FeatureSchema schema_;
  double p_bar_;
  std::optional<CourseGraph> graph_;
};

// Fraction of correct answers across the datasets' question interactions (0.5 if none).
double global_correct_rate(const std::vector<const Dataset*>& datasets);

}  // namespace ktransfer
