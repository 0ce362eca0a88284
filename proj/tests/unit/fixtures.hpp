#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ktransfer/domain.hpp"
#include "ktransfer/synth.hpp"

namespace kt_test {

using namespace ktransfer;

inline Interaction question(const std::string& student, const std::string& course, std::int64_t ts,
                            const std::string& qid, std::vector<std::string> kcs, int correct, int topic = 0,
                            int rating = 50, std::uint8_t context = 3) {
  Interaction x;
  x.student_id = student;
  x.course_id = course;
  x.timestamp = ts;
  x.activity = Activity::question;
  x.question_id = qid;
  x.kc_ids = std::move(kcs);
  x.topic_index = topic;
  x.difficulty_rating = rating;
  x.context = context;
  x.correct = static_cast<std::uint8_t>(correct);
  x.response_time_ms = 20000;
  return x;
}

inline Interaction material(const std::string& student, const std::string& course, std::int64_t ts, Activity a,
                            int topic = 0, std::uint8_t context = 1) {
  Interaction x;
  x.student_id = student;
  x.course_id = course;
  x.timestamp = ts;
  x.activity = a;
  x.topic_index = topic;
  x.context = context;
  return x;
}

// Course "C" with questions q1..q4: q1,q2 on k1 (topic 0), q3 on k2, q4 on k1+k2 (topic 1).
inline CourseMeta tiny_meta(const std::string& course = "C") {
  CourseMeta m;
  m.course_id = course;
  m.kcs = {course + "k1", course + "k2"};
  m.questions[course + "q1"] = {{course + "k1"}, 20};
  m.questions[course + "q2"] = {{course + "k1"}, 50};
  m.questions[course + "q3"] = {{course + "k2"}, 70};
  m.questions[course + "q4"] = {{course + "k1", course + "k2"}, 90};
  m.kc_prereq_edges = {{course + "k1", course + "k2"}};
  m.topic_count = 2;
  return m;
}

inline StudentHistory history(const std::string& student, const std::string& course,
                              std::vector<Interaction> xs) {
  return StudentHistory{student, course, std::move(xs)};
}

// Two students, valid against tiny_meta.
inline Dataset tiny_dataset(const std::string& c = "C") {
  auto meta = tiny_meta(c);
  std::vector<StudentHistory> hs;
  hs.push_back(history("s1", c,
                       {question("s1", c, 100, c + "q1", {c + "k1"}, 1, 0, 20),
                        material("s1", c, 150, Activity::video),
                        question("s1", c, 200, c + "q2", {c + "k1"}, 0, 0, 50),
                        question("s1", c, 4000, c + "q4", {c + "k1", c + "k2"}, 1, 1, 90)}));
  hs.push_back(history("s2", c,
                       {question("s2", c, 300, c + "q3", {c + "k2"}, 0, 1, 70),
                        question("s2", c, 90000, c + "q1", {c + "k1"}, 1, 0, 20)}));
  return Dataset(std::move(meta), std::move(hs));
}

// Small synthetic configuration for fast tests.
inline SynthConfig small_synth(int students = 40) {
  SynthConfig c;
  c.kcs_per_course = 8;
  c.questions_per_course = 40;
  c.topics_per_course = 4;
  c.students_per_course = students;
  c.calibration_students = 60;
  c.context_questions = {1, 2, 1, 2, 2, 1};
  return c;
}

}  // namespace kt_test
