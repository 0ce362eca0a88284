#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ktransfer {

enum class Activity : std::uint8_t { question, video, reading };

const char* to_string(Activity a);
std::optional<Activity> parse_activity(const std::string& s);

inline constexpr int kMinDifficulty = 10;
inline constexpr int kMaxDifficulty = 90;
inline constexpr std::size_t kContextCount = 6;

// Study-module labels. Interactions store an index into this list.
using ContextLabels = std::array<std::string, kContextCount>;
const ContextLabels& default_context_labels();

struct Interaction {
  std::string student_id;
  std::string course_id;
  std::int64_t timestamp = 0;  // seconds since epoch
  Activity activity = Activity::question;
  std::optional<std::string> question_id;
  std::vector<std::string> kc_ids;
  int topic_index = 0;
  std::optional<int> difficulty_rating;
  std::uint8_t context = 0;
  std::optional<std::uint8_t> correct;
  std::optional<std::int64_t> response_time_ms;
  std::optional<std::int64_t> lag_time_ms;

  bool is_question() const { return activity == Activity::question; }
  bool operator==(const Interaction&) const = default;
};

struct StudentHistory {
  std::string student_id;
  std::string course_id;
  std::vector<Interaction> interactions;

  std::size_t question_count() const;
  int max_topic() const;  // -1 when empty
  bool operator==(const StudentHistory&) const = default;
};

struct QuestionInfo {
  std::vector<std::string> kc_ids;
  int difficulty_rating = 50;
  bool operator==(const QuestionInfo&) const = default;
};

struct CourseMeta {
  std::string course_id;
  std::map<std::string, QuestionInfo> questions;
  std::set<std::string> kcs;
  std::set<std::pair<std::string, std::string>> kc_prereq_edges;  // (from, to): from is a prerequisite of to
  int topic_count = 1;
  ContextLabels context_labels = default_context_labels();

  bool operator==(const CourseMeta&) const = default;
};

// Histories are kept in first-appearance order; lookups go through an index.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(CourseMeta meta) : meta_(std::move(meta)) {}
  Dataset(CourseMeta meta, std::vector<StudentHistory> histories);

  const std::string& course_id() const { return meta_.course_id; }
  const CourseMeta& meta() const { return meta_; }
  const std::vector<StudentHistory>& histories() const { return histories_; }

  std::size_t student_count() const { return histories_.size(); }
  std::size_t question_interaction_count() const;
  bool empty() const { return histories_.empty(); }

  const StudentHistory* find(const std::string& student_id) const;
  std::vector<std::string> student_ids() const;

  // Keeps histories whose student id satisfies pred, preserving order.
  template <typename Pred>
  Dataset filter(Pred pred) const {
    std::vector<StudentHistory> kept;
    for (const auto& h : histories_)
      if (pred(h)) kept.push_back(h);
    return Dataset(meta_, std::move(kept));
  }

  Dataset subset(const std::vector<std::string>& student_ids) const;

  bool operator==(const Dataset& o) const { return meta_ == o.meta_ && histories_ == o.histories_; }

 private:
  void reindex();

  CourseMeta meta_;
  std::vector<StudentHistory> histories_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Violation {
  std::string student_id;  // empty for course-level rules
  std::size_t index = 0;   // interaction index within the history
  std::string rule;
  std::string detail;

  bool operator==(const Violation&) const = default;
};

namespace rules {
inline constexpr const char* kDifficultyRange = "difficulty-range";
inline constexpr const char* kContextLabel = "context-label";
inline constexpr const char* kQuestionFields = "question-fields";
inline constexpr const char* kMaterialFields = "material-fields";
inline constexpr const char* kKcNonEmpty = "kc-non-empty";
inline constexpr const char* kCorrectBinary = "correct-binary";
inline constexpr const char* kTimestampOrder = "timestamp-order";
inline constexpr const char* kOwnership = "history-ownership";
inline constexpr const char* kUnknownQuestion = "unknown-question";
inline constexpr const char* kUnknownKc = "unknown-kc";
inline constexpr const char* kTopicRange = "topic-range";
inline constexpr const char* kNegativeTime = "negative-time";
inline constexpr const char* kPrereqKc = "prereq-unknown-kc";
inline constexpr const char* kQuestionKc = "question-without-kc";
inline constexpr const char* kDuplicateStudent = "duplicate-student";
}  // namespace rules

std::vector<Violation> validate_dataset(const Dataset& dataset);

}  // namespace ktransfer
