#include "ktransfer/domain.hpp"

#include <algorithm>

namespace ktransfer {

const char* to_string(Activity a) {
  switch (a) {
    case Activity::question: return "question";
    case Activity::video: return "video";
    case Activity::reading: return "reading";
  }
  return "?";
}

std::optional<Activity> parse_activity(const std::string& s) {
  if (s == "question") return Activity::question;
  if (s == "video") return Activity::video;
  if (s == "reading") return Activity::reading;
  return std::nullopt;
}

const ContextLabels& default_context_labels() {
  static const ContextLabels labels = {"pre_test", "effective_learning", "review",
                                       "practice", "remediation", "post_test"};
  return labels;
}

std::size_t StudentHistory::question_count() const {
  return static_cast<std::size_t>(
      std::count_if(interactions.begin(), interactions.end(), [](const Interaction& x) { return x.is_question(); }));
}

int StudentHistory::max_topic() const {
  int m = -1;
  for (const auto& x : interactions) m = std::max(m, x.topic_index);
  return m;
}

Dataset::Dataset(CourseMeta meta, std::vector<StudentHistory> histories)
    : meta_(std::move(meta)), histories_(std::move(histories)) {
  reindex();
}

void Dataset::reindex() {
  index_.clear();
  index_.reserve(histories_.size());
  for (std::size_t i = 0; i < histories_.size(); ++i) index_.emplace(histories_[i].student_id, i);
}

std::size_t Dataset::question_interaction_count() const {
  std::size_t n = 0;
  for (const auto& h : histories_) n += h.question_count();
  return n;
}

const StudentHistory* Dataset::find(const std::string& student_id) const {
  auto it = index_.find(student_id);
  return it == index_.end() ? nullptr : &histories_[it->second];
}

std::vector<std::string> Dataset::student_ids() const {
  std::vector<std::string> ids;
  ids.reserve(histories_.size());
  for (const auto& h : histories_) ids.push_back(h.student_id);
  return ids;
}

Dataset Dataset::subset(const std::vector<std::string>& student_ids) const {
  std::vector<StudentHistory> kept;
  kept.reserve(student_ids.size());
  for (const auto& id : student_ids)
    if (const auto* h = find(id)) kept.push_back(*h);
  return Dataset(meta_, std::move(kept));
}

namespace {

void check_interaction(const CourseMeta& meta, const StudentHistory& h, std::size_t i,
                       std::vector<Violation>& out) {
  const Interaction& x = h.interactions[i];
  auto add = [&](const char* rule, std::string detail) {
    out.push_back(Violation{h.student_id, i, rule, std::move(detail)});
  };

  if (x.student_id != h.student_id || x.course_id != h.course_id || x.course_id != meta.course_id)
    add(rules::kOwnership, "interaction belongs to " + x.student_id + "@" + x.course_id);

  if (i > 0 && x.timestamp < h.interactions[i - 1].timestamp)
    add(rules::kTimestampOrder, "timestamp " + std::to_string(x.timestamp) + " precedes previous");

  if (x.context >= kContextCount) add(rules::kContextLabel, "context index " + std::to_string(x.context));

  if (x.topic_index < 0 || x.topic_index >= meta.topic_count)
    add(rules::kTopicRange, "topic " + std::to_string(x.topic_index));

  if ((x.response_time_ms && *x.response_time_ms < 0) || (x.lag_time_ms && *x.lag_time_ms < 0))
    add(rules::kNegativeTime, "negative response or lag time");

  if (x.difficulty_rating && (*x.difficulty_rating < kMinDifficulty || *x.difficulty_rating > kMaxDifficulty))
    add(rules::kDifficultyRange, "rating " + std::to_string(*x.difficulty_rating) + " outside [10, 90]");

  if (x.is_question()) {
    if (!x.question_id || !x.difficulty_rating || !x.correct)
      add(rules::kQuestionFields, "question interaction missing question_id, difficulty or correct");
    if (x.kc_ids.empty()) add(rules::kKcNonEmpty, "question interaction has no KC");
    if (x.correct && *x.correct > 1) add(rules::kCorrectBinary, "correct=" + std::to_string(*x.correct));
    if (x.question_id && !meta.questions.count(*x.question_id))
      add(rules::kUnknownQuestion, "question " + *x.question_id);
  } else {
    if (x.question_id || x.correct || x.difficulty_rating)
      add(rules::kMaterialFields, "material interaction carries question fields");
  }
  for (const auto& kc : x.kc_ids)
    if (!meta.kcs.count(kc)) add(rules::kUnknownKc, "kc " + kc);
}

}  // namespace

std::vector<Violation> validate_dataset(const Dataset& dataset) {
  std::vector<Violation> out;
  const CourseMeta& meta = dataset.meta();

  for (const auto& [from, to] : meta.kc_prereq_edges)
    if (!meta.kcs.count(from) || !meta.kcs.count(to))
      out.push_back(Violation{"", 0, rules::kPrereqKc, from + " -> " + to});
  for (const auto& [qid, info] : meta.questions) {
    if (info.kc_ids.empty()) out.push_back(Violation{"", 0, rules::kQuestionKc, qid});
    for (const auto& kc : info.kc_ids)
      if (!meta.kcs.count(kc)) out.push_back(Violation{"", 0, rules::kUnknownKc, qid + " -> " + kc});
    if (info.difficulty_rating < kMinDifficulty || info.difficulty_rating > kMaxDifficulty)
      out.push_back(Violation{"", 0, rules::kDifficultyRange, qid});
  }

  std::set<std::string> seen;
  for (const auto& h : dataset.histories()) {
    if (!seen.insert(h.student_id).second)
      out.push_back(Violation{h.student_id, 0, rules::kDuplicateStudent, "student appears twice"});
    for (std::size_t i = 0; i < h.interactions.size(); ++i) check_interaction(meta, h, i, out);
  }
  return out;
}

}  // namespace ktransfer
