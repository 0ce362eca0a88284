#include "ktransfer/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "ktransfer/errors.hpp"
#include "ktransfer/random.hpp"

namespace ktransfer {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

bool read_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    auto item = s.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    if (!item.empty()) out.push_back(std::move(item));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

template <typename T>
std::optional<T> parse_int(const std::string& s) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class HeaderIndex {
 public:
  HeaderIndex(const std::vector<std::string>& header, std::size_t line) : line_(line) {
    for (std::size_t i = 0; i < header.size(); ++i) pos_[header[i]] = i;
  }
  std::size_t require(const std::string& name) const {
    auto it = pos_.find(name);
    if (it == pos_.end()) throw ParseError(line_, name, "missing column in header");
    return it->second;
  }

 private:
  std::map<std::string, std::size_t> pos_;
  std::size_t line_;
};

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

ColumnMapping ColumnMapping::from_json_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("column mapping " + path.string() + ": " + e.what());
  }
  ColumnMapping m;
  if (j.contains("columns")) m.columns = j["columns"].get<std::map<std::string, std::string>>();
  if (j.contains("activity_values")) m.activity_values = j["activity_values"].get<std::map<std::string, std::string>>();
  if (j.contains("context_values")) m.context_values = j["context_values"].get<std::map<std::string, std::string>>();
  if (j.contains("kc_separator")) {
    auto s = j["kc_separator"].get<std::string>();
    if (s.size() != 1) throw ConfigError("kc_separator must be a single character");
    m.kc_separator = s[0];
  }
  if (j.contains("timestamp_divisor")) m.timestamp_divisor = j["timestamp_divisor"].get<std::int64_t>();
  if (m.timestamp_divisor <= 0) throw ConfigError("timestamp_divisor must be positive");
  return m;
}

std::string ColumnMapping::source_name(const std::string& canonical) const {
  auto it = columns.find(canonical);
  return it == columns.end() ? canonical : it->second;
}

CourseRegistry read_registry_csv(std::istream& in) {
  CourseRegistry reg;
  std::string line;
  std::size_t lineno = 1;
  if (!read_line(in, line)) throw ParseError(1, "", "empty registry file");
  HeaderIndex hdr(split_csv_line(line), 1);
  const auto c_q = hdr.require("question_id"), c_c = hdr.require("course_id"), c_k = hdr.require("kc_ids"),
             c_d = hdr.require("difficulty");
  const auto width = std::max({c_q, c_c, c_k, c_d}) + 1;
  while (read_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() < width) throw ParseError(lineno, "", "expected at least " + std::to_string(width) + " fields");
    auto d = parse_int<int>(f[c_d]);
    if (!d) throw ParseError(lineno, "difficulty", "not an integer: '" + f[c_d] + "'");
    auto kcs = split_list(f[c_k], ';');
    if (kcs.empty()) throw ParseError(lineno, "kc_ids", "question without KC");
    if (f[c_q].empty()) throw ParseError(lineno, "question_id", "empty question id");
    auto& meta = reg[f[c_c]];
    meta.course_id = f[c_c];
    for (const auto& k : kcs) meta.kcs.insert(k);
    if (!meta.questions.emplace(f[c_q], QuestionInfo{kcs, *d}).second)
      throw ParseError(lineno, "question_id", "duplicate question " + f[c_q]);
  }
  return reg;
}

CourseRegistry read_registry_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_registry_csv(in);
}

void read_prereq_csv(std::istream& in, CourseRegistry& registry) {
  std::map<std::string, std::string> kc_course;
  for (const auto& [cid, meta] : registry)
    for (const auto& k : meta.kcs) kc_course[k] = cid;

  std::string line;
  std::size_t lineno = 1;
  if (!read_line(in, line)) return;
  HeaderIndex hdr(split_csv_line(line), 1);
  const auto c_from = hdr.require("kc_from"), c_to = hdr.require("kc_to");
  while (read_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() <= std::max(c_from, c_to)) throw ParseError(lineno, "", "expected 2 fields");
    auto a = kc_course.find(f[c_from]);
    auto b = kc_course.find(f[c_to]);
    if (a == kc_course.end()) throw ReferentialError("prereq line " + std::to_string(lineno) + ": unknown KC " + f[c_from]);
    if (b == kc_course.end()) throw ReferentialError("prereq line " + std::to_string(lineno) + ": unknown KC " + f[c_to]);
    if (a->second != b->second)
      throw ReferentialError("prereq line " + std::to_string(lineno) + ": edge crosses courses");
    registry[a->second].kc_prereq_edges.emplace(f[c_from], f[c_to]);
  }
}

void read_prereq_csv(const std::filesystem::path& path, CourseRegistry& registry) {
  auto in = open_in(path);
  read_prereq_csv(in, registry);
}

std::vector<Dataset> read_log_csv(std::istream& in, const CourseRegistry& registry, const ParseOptions& opts) {
  const auto& map = opts.mapping;
  std::string line;
  if (!read_line(in, line)) throw ParseError(1, "", "empty log file");
  HeaderIndex hdr(split_csv_line(line), 1);
  std::array<std::size_t, std::size(kLogColumns)> col{};
  for (std::size_t i = 0; i < col.size(); ++i) col[i] = hdr.require(map.source_name(kLogColumns[i]));
  const std::size_t width = *std::max_element(col.begin(), col.end()) + 1;
  enum { kStudent, kCourse, kTime, kActivity, kQuestion, kKcs, kTopic, kDifficulty, kContext, kCorrect, kRt, kLag };

  struct Row {
    Interaction x;
    std::size_t order;
  };
  // course -> (student order, student -> rows)
  struct CourseRows {
    std::vector<std::string> order;
    std::map<std::string, std::vector<Row>> rows;
    int max_topic = 0;
  };
  std::map<std::string, CourseRows> courses;

  std::size_t lineno = 1, order = 0;
  while (read_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() < width)
      throw ParseError(lineno, "", "expected " + std::to_string(width) + " fields, got " + std::to_string(f.size()));
    auto field = [&](int c) -> const std::string& { return f[col[c]]; };
    auto fail = [&](int c, const std::string& msg) -> ParseError { return ParseError(lineno, kLogColumns[c], msg); };
    auto int_field = [&](int c) -> std::int64_t {
      auto v = parse_int<std::int64_t>(field(c));
      if (!v) throw fail(c, "not an integer: '" + field(c) + "'");
      return *v;
    };
    auto opt_int = [&](int c) -> std::optional<std::int64_t> {
      if (field(c).empty()) return std::nullopt;
      return int_field(c);
    };

    Interaction x;
    x.student_id = field(kStudent);
    x.course_id = field(kCourse);
    if (x.student_id.empty()) throw fail(kStudent, "empty student id");
    x.timestamp = int_field(kTime) / map.timestamp_divisor;

    std::string act = field(kActivity);
    if (auto it = map.activity_values.find(act); it != map.activity_values.end()) act = it->second;
    auto activity = parse_activity(act);
    if (!activity) throw fail(kActivity, "unknown activity '" + act + "'");
    x.activity = *activity;

    std::string ctx = field(kContext);
    if (auto it = map.context_values.find(ctx); it != map.context_values.end()) ctx = it->second;
    auto cit = std::find(opts.context_labels.begin(), opts.context_labels.end(), ctx);
    if (cit == opts.context_labels.end()) throw fail(kContext, "unknown context '" + ctx + "'");
    x.context = static_cast<std::uint8_t>(cit - opts.context_labels.begin());

    auto topic = int_field(kTopic);
    if (topic < 0) throw fail(kTopic, "negative topic index");
    x.topic_index = static_cast<int>(topic);
    x.response_time_ms = opt_int(kRt);
    x.lag_time_ms = opt_int(kLag);
    if (x.response_time_ms && *x.response_time_ms < 0) throw fail(kRt, "negative response time");
    if (x.lag_time_ms && *x.lag_time_ms < 0) throw fail(kLag, "negative lag time");

    auto reg_it = registry.find(x.course_id);
    x.kc_ids = split_list(field(kKcs), map.kc_separator);

    if (x.is_question()) {
      const std::string& qid = field(kQuestion);
      if (qid.empty()) throw fail(kQuestion, "question row without question_id");
      if (reg_it == registry.end() || !reg_it->second.questions.count(qid))
        throw ReferentialError("line " + std::to_string(lineno) + ": unknown question " + qid + " in course " +
                               x.course_id);
      const QuestionInfo& info = reg_it->second.questions.at(qid);
      x.question_id = qid;
      if (x.kc_ids.empty()) x.kc_ids = info.kc_ids;
      x.difficulty_rating = field(kDifficulty).empty() ? info.difficulty_rating : static_cast<int>(int_field(kDifficulty));
      if (*x.difficulty_rating < kMinDifficulty || *x.difficulty_rating > kMaxDifficulty)
        throw fail(kDifficulty, "rating outside [10, 90]");
      auto c = int_field(kCorrect);
      if (c != 0 && c != 1) throw fail(kCorrect, "correct must be 0 or 1, got " + field(kCorrect));
      x.correct = static_cast<std::uint8_t>(c);
    } else {
      if (!field(kQuestion).empty()) throw fail(kQuestion, "material row with question_id");
      if (!field(kCorrect).empty()) throw fail(kCorrect, "material row with correctness");
      if (!field(kDifficulty).empty()) throw fail(kDifficulty, "material row with difficulty");
    }
    for (const auto& kc : x.kc_ids)
      if (reg_it == registry.end() || !reg_it->second.kcs.count(kc))
        throw ReferentialError("line " + std::to_string(lineno) + ": unknown KC " + kc);

    auto& cr = courses[x.course_id];
    cr.max_topic = std::max(cr.max_topic, x.topic_index);
    auto& rows = cr.rows[x.student_id];
    if (rows.empty()) cr.order.push_back(x.student_id);
    rows.push_back(Row{std::move(x), order++});
  }

  std::vector<Dataset> out;
  for (auto& [cid, cr] : courses) {
    CourseMeta meta = registry.count(cid) ? registry.at(cid) : CourseMeta{};
    meta.course_id = cid;
    meta.context_labels = opts.context_labels;
    meta.topic_count = opts.topic_count.value_or(cr.max_topic + 1);
    std::vector<StudentHistory> histories;
    histories.reserve(cr.order.size());
    for (const auto& sid : cr.order) {
      auto& rows = cr.rows[sid];
      std::stable_sort(rows.begin(), rows.end(),
                       [](const Row& a, const Row& b) { return a.x.timestamp < b.x.timestamp; });
      StudentHistory h{sid, cid, {}};
      h.interactions.reserve(rows.size());
      for (auto& r : rows) h.interactions.push_back(std::move(r.x));
      histories.push_back(std::move(h));
    }
    out.emplace_back(std::move(meta), std::move(histories));
  }
  return out;
}

Dataset parse_log_csv(const std::filesystem::path& path, const CourseRegistry& registry, const ParseOptions& opts) {
  auto in = open_in(path);
  auto all = read_log_csv(in, registry, opts);
  if (all.size() != 1)
    throw ConfigError(path.string() + ": expected exactly one course, found " + std::to_string(all.size()));
  return std::move(all.front());
}

void write_log_csv(std::ostream& out, const Dataset& dataset, bool header) {
  const auto& labels = dataset.meta().context_labels;
  if (header) {
    for (std::size_t i = 0; i < std::size(kLogColumns); ++i) out << (i ? "," : "") << kLogColumns[i];
    out << '\n';
  }
  for (const auto& h : dataset.histories()) {
    for (const auto& x : h.interactions) {
      out << quote_if_needed(x.student_id) << ',' << quote_if_needed(x.course_id) << ',' << x.timestamp << ','
          << to_string(x.activity) << ',' << quote_if_needed(x.question_id.value_or("")) << ','
          << quote_if_needed(join(x.kc_ids, ';')) << ',' << x.topic_index << ',';
      if (x.difficulty_rating) out << *x.difficulty_rating;
      out << ',' << labels[x.context] << ',';
      if (x.correct) out << static_cast<int>(*x.correct);
      out << ',';
      if (x.response_time_ms) out << *x.response_time_ms;
      out << ',';
      if (x.lag_time_ms) out << *x.lag_time_ms;
      out << '\n';
    }
  }
}

void write_log_csv(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_log_csv(out, dataset);
}

void write_registry_csv(std::ostream& out, const std::vector<const CourseMeta*>& courses) {
  out << "question_id,course_id,kc_ids,difficulty\n";
  for (const auto* meta : courses)
    for (const auto& [qid, info] : meta->questions)
      out << quote_if_needed(qid) << ',' << quote_if_needed(meta->course_id) << ','
          << quote_if_needed(join(info.kc_ids, ';')) << ',' << info.difficulty_rating << '\n';
}

void write_prereq_csv(std::ostream& out, const std::vector<const CourseMeta*>& courses) {
  out << "kc_from,kc_to\n";
  for (const auto* meta : courses)
    for (const auto& [a, b] : meta->kc_prereq_edges) out << quote_if_needed(a) << ',' << quote_if_needed(b) << '\n';
}

Dataset filter_min_responses(const Dataset& dataset, std::size_t min_responses) {
  return dataset.filter([&](const StudentHistory& h) { return h.question_count() >= min_responses; });
}

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (const auto& [_, f] : assignment) ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

Dataset FoldAssignment::test_fold(const Dataset& dataset, int f) const {
  return dataset.filter([&](const StudentHistory& h) {
    auto it = assignment.find(h.student_id);
    return it != assignment.end() && it->second == f;
  });
}

Dataset FoldAssignment::train_folds(const Dataset& dataset, int f) const {
  return dataset.filter([&](const StudentHistory& h) {
    auto it = assignment.find(h.student_id);
    return it != assignment.end() && it->second != f;
  });
}

FoldAssignment split_by_student(const Dataset& dataset, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be at least 2, got " + std::to_string(k));
  if (dataset.student_count() < static_cast<std::size_t>(k))
    throw ConfigError("cannot split " + std::to_string(dataset.student_count()) + " students into " +
                      std::to_string(k) + " folds");
  auto ids = dataset.student_ids();
  Rng rng(derive_seed(seed, {0x5f01d}));
  rng.shuffle(ids);
  FoldAssignment fa;
  fa.k = k;
  fa.assignment.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) fa.assignment.emplace(ids[i], static_cast<int>(i % static_cast<std::size_t>(k)));
  return fa;
}

std::vector<std::string> pilot_eligible_students(const Dataset& dataset) {
  const int last = dataset.meta().topic_count - 1;
  std::vector<std::string> ids;
  for (const auto& h : dataset.histories())
    if (h.max_topic() == last) ids.push_back(h.student_id);
  return ids;
}

Dataset sample_pilot_students(const Dataset& train_dataset, std::size_t n, std::uint64_t seed) {
  auto eligible = pilot_eligible_students(train_dataset);
  if (eligible.size() < n)
    throw ConfigError("requested " + std::to_string(n) + " pilot students but only " +
                      std::to_string(eligible.size()) + " reached the last topic");
  Rng rng(derive_seed(seed, {0x9170}));
  // Partial Fisher-Yates: the first n slots are a uniform sample.
  for (std::size_t i = 0; i < n; ++i) std::swap(eligible[i], eligible[i + rng.below(eligible.size() - i)]);
  eligible.resize(n);
  return train_dataset.subset(eligible);
}

}  // namespace ktransfer
