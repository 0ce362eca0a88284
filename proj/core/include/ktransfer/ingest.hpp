#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ktransfer/domain.hpp"

namespace ktransfer {

// Canonical log header, in order.
inline constexpr const char* kLogColumns[] = {
    "student_id", "course_id", "timestamp", "activity",         "question_id",  "kc_ids",
    "topic_index", "difficulty", "context", "correct", "response_time_ms", "lag_time_ms"};

// Maps canonical column names to the column names of a foreign export, plus
// value rewrites for the activity and context columns. An empty mapping reads
// the canonical layout.
struct ColumnMapping {
  std::map<std::string, std::string> columns;                  // canonical -> source
  std::map<std::string, std::string> activity_values;          // source -> canonical
  std::map<std::string, std::string> context_values;           // source -> canonical
  char kc_separator = ';';
  std::int64_t timestamp_divisor = 1;                          // e.g. 1000 for ms exports

  static ColumnMapping from_json_file(const std::filesystem::path& path);
  std::string source_name(const std::string& canonical) const;
};

// course_id -> CourseMeta (questions, KCs, prereq edges); topic_count is
// filled in from the logs at parse time.
using CourseRegistry = std::map<std::string, CourseMeta>;

CourseRegistry read_registry_csv(std::istream& in);
CourseRegistry read_registry_csv(const std::filesystem::path& path);
void read_prereq_csv(std::istream& in, CourseRegistry& registry);
void read_prereq_csv(const std::filesystem::path& path, CourseRegistry& registry);

struct ParseOptions {
  ColumnMapping mapping;
  ContextLabels context_labels = default_context_labels();
  std::optional<int> topic_count;  // default: max observed topic_index + 1
};

// Every course found in the file, ordered by course id.
std::vector<Dataset> read_log_csv(std::istream& in, const CourseRegistry& registry, const ParseOptions& opts = {});
// Requires the file to hold exactly one course.
Dataset parse_log_csv(const std::filesystem::path& path, const CourseRegistry& registry,
                      const ParseOptions& opts = {});

void write_log_csv(std::ostream& out, const Dataset& dataset, bool header = true);
void write_log_csv(const std::filesystem::path& path, const Dataset& dataset);
void write_registry_csv(std::ostream& out, const std::vector<const CourseMeta*>& courses);
void write_prereq_csv(std::ostream& out, const std::vector<const CourseMeta*>& courses);

// Student-level filter; only question interactions count.
Dataset filter_min_responses(const Dataset& dataset, std::size_t min_responses = 10);

struct FoldAssignment {
  int k = 0;
  std::unordered_map<std::string, int> assignment;

  std::vector<std::size_t> fold_sizes() const;
  // Students of the dataset in fold f (test) or outside it (train), in dataset order.
  Dataset test_fold(const Dataset& dataset, int f) const;
  Dataset train_folds(const Dataset& dataset, int f) const;
};

FoldAssignment split_by_student(const Dataset& dataset, int k, std::uint64_t seed);

// Students whose maximum topic index is the course's last topic.
std::vector<std::string> pilot_eligible_students(const Dataset& dataset);
Dataset sample_pilot_students(const Dataset& train_dataset, std::size_t n, std::uint64_t seed);

// Minimal comma splitter with double-quote support.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace ktransfer
