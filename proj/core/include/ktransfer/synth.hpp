#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ktransfer/domain.hpp"

namespace ktransfer {

struct SynthConfig {
  int course_count = 5;
  int kcs_per_course = 48;
  int questions_per_course = 400;
  int topics_per_course = 8;
  int students_per_course = 1000;

  // Latent difficulty b_q = course offset + KC effect + question effect.
  double kc_difficulty_sd = 0.5;
  double question_difficulty_sd = 0.8;
  double rating_noise_sd = 1.0;      // added to b_q before mapping to [10, 90]
  double second_kc_probability = 0.3;

  double ability_mean = 0.0;
  double ability_sd = 1.0;
  double ability_drift_sd = 0.1;     // random-walk step of ability per answered question
  double session_shift_sd = 0.3;     // ability jump at the start of each session
  double success_growth = 0.0;       // ability gain after a correct answer
  double failure_growth = 0.0;       // ability gain after an incorrect answer
  double learn_rate_mean = 0.25;     // per-KC skill gain per practice (log-normal)
  double learn_rate_sd = 0.08;
  double material_gain = 0.5;        // skill gain of a video/reading, as a fraction of the learn rate
  double skill_cap = 2.5;
  double forgetting_days = 10.0;     // e-folding time of unpractised skill
  double guess = 0.2;
  double slip = 0.05;

  // Additive logit effect per context: pre_test, effective_learning, review,
  // practice, remediation, post_test.
  std::array<double, kContextCount> context_effect = {-0.2, -0.1, 0.0, 0.3, -0.3, 0.2};
  // Questions per context and topic (remediation only fires for struggling students).
  std::array<int, kContextCount> context_questions = {4, 8, 4, 8, 8, 4};
  double video_probability = 0.7;
  double reading_probability = 0.4;

  double dropout_fraction = 0.2;
  double session_gap_mean_h = 48.0;
  double session_gap_min_h = 2.0;
  double response_time_median_s = 25.0;
  double response_time_sigma = 0.4;

  // Correctness targets spread linearly over courses, first course highest.
  double correctness_high = 0.713;
  double correctness_low = 0.624;
  int calibration_students = 400;

  std::int64_t start_timestamp = 1'600'000'000;
  std::uint64_t seed = 1;

  void validate() const;
};

// A generated course plus the latent quantities behind it.
struct SyntheticCourse {
  CourseMeta meta;
  int course_index = 0;
  double course_offset = 0.0;
  double target_correctness = 0.0;
  std::map<std::string, double> question_difficulty;  // full latent b_q
  std::map<std::string, double> kc_learn_rate;
  std::map<std::string, int> kc_topic;
  std::vector<std::vector<std::string>> topic_questions;  // question ids per topic
};

struct GroundTruth {
  std::map<std::string, double> student_ability;
};

// Questions carry 1-2 KCs; prereq edges only run from earlier-topic KCs to later
// ones, so the DAG is acyclic. The course offset is calibrated so a simulated
// cohort hits the course's correctness target.
SyntheticCourse generate_course(const SynthConfig& config, int course_index, std::uint64_t seed);

Dataset simulate_students(const SyntheticCourse& course, const SynthConfig& config, int n, std::uint64_t seed,
                          GroundTruth* truth = nullptr);

struct SyntheticSuite {
  std::vector<SyntheticCourse> courses;
  std::vector<Dataset> datasets;
  std::vector<GroundTruth> truth;
};

SyntheticSuite generate_transfer_suite(const SynthConfig& config, std::uint64_t seed);

// Writes C<i>.csv logs, registry.csv, prereqs.csv and ground_truth.csv.
std::vector<std::filesystem::path> write_suite(const SyntheticSuite& suite, const std::filesystem::path& dir);
void write_ground_truth(std::ostream& out, const SyntheticSuite& suite);

}  // namespace ktransfer
