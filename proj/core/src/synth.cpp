#include "ktransfer/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <unordered_map>

#include "ktransfer/errors.hpp"
#include "ktransfer/ingest.hpp"
#include "ktransfer/random.hpp"

namespace ktransfer {

namespace {

constexpr std::uint8_t kPreTest = 0, kLearning = 1, kReview = 2, kPractice = 3, kRemediation = 4, kPostTest = 5;
constexpr double kDay = 86400.0;

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::string padded(const std::string& prefix, int value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*d", width, value);
  return prefix + buf;
}

struct Latent {
  std::vector<std::string> question_ids;
  std::unordered_map<std::string, double> intrinsic;  // b_q without the course offset
  std::unordered_map<std::string, double> learn_rate;
  std::vector<std::vector<std::string>> topic_kcs;
};

struct SkillTrace {
  double value = 0.0;
  double last = 0.0;
};

class StudentSimulator {
 public:
  StudentSimulator(const SyntheticCourse& course, const Latent& latent, const SynthConfig& cfg, double offset)
      : course_(course), latent_(latent), cfg_(cfg), offset_(offset) {}

  StudentHistory run(const std::string& student_id, Rng& rng, double* ability_out) {
    StudentHistory h;
    h.student_id = student_id;
    h.course_id = course_.meta.course_id;
    const int T = course_.meta.topic_count;
    double theta = rng.normal(cfg_.ability_mean, cfg_.ability_sd);
    if (ability_out) *ability_out = theta;
    const bool drops = T > 1 && rng.bernoulli(cfg_.dropout_fraction);
    const int last_topic = drops ? static_cast<int>(rng.below(static_cast<std::uint64_t>(T - 1))) : T - 1;

    skills_.clear();
    prev_time_.reset();
    now_ = static_cast<double>(cfg_.start_timestamp) + rng.uniform(0.0, 30.0 * kDay);

    for (int topic = 0; topic <= last_topic; ++topic) {
      if (topic > 0) {
        now_ += 3600.0 * std::max(cfg_.session_gap_min_h, rng.exponential(cfg_.session_gap_mean_h));
        theta += rng.normal(0.0, cfg_.session_shift_sd);
      }
      int right = 0, total = 0;
      for (std::uint8_t ctx : {kPreTest, kLearning, kPractice, kReview, kRemediation, kPostTest}) {
        if (ctx == kLearning) {
          if (rng.bernoulli(cfg_.video_probability)) material(h, Activity::video, topic, ctx);
          if (rng.bernoulli(cfg_.reading_probability)) material(h, Activity::reading, topic, ctx);
        }
        if (ctx == kReview && topic == 0) continue;
        if (ctx == kRemediation && (total == 0 || static_cast<double>(right) / total >= 0.6)) continue;
        for (int i = 0; i < cfg_.context_questions[ctx]; ++i) {
          const int source_topic = ctx == kReview ? static_cast<int>(rng.below(static_cast<std::uint64_t>(topic))) : topic;
          const auto& pool = course_.topic_questions[static_cast<std::size_t>(source_topic)];
          const std::string& q = pool[rng.below(pool.size())];
          const int y = answer(h, q, topic, ctx, theta, rng);
          theta += rng.normal(0.0, cfg_.ability_drift_sd) + (y ? cfg_.success_growth : cfg_.failure_growth);
          right += y;
          ++total;
        }
      }
    }
    return h;
  }

 private:
  double effective(const std::string& kc) const {
    auto it = skills_.find(kc);
    if (it == skills_.end()) return 0.0;
    return it->second.value * std::exp(-(now_ - it->second.last) / (cfg_.forgetting_days * kDay));
  }

  void practice(const std::string& kc, double gain) {
    const double v = std::min(cfg_.skill_cap, effective(kc) + gain);
    skills_[kc] = {v, now_};
  }

  Interaction base(Activity a, int topic, std::uint8_t ctx) {
    Interaction x;
    x.course_id = course_.meta.course_id;
    x.timestamp = static_cast<std::int64_t>(std::floor(now_));
    x.activity = a;
    x.topic_index = topic;
    x.context = ctx;
    if (prev_time_) x.lag_time_ms = (x.timestamp - *prev_time_) * 1000;
    prev_time_ = x.timestamp;
    return x;
  }

  void material(StudentHistory& h, Activity a, int topic, std::uint8_t ctx) {
    Interaction x = base(a, topic, ctx);
    x.student_id = h.student_id;
    h.interactions.push_back(std::move(x));
    for (const auto& kc : latent_.topic_kcs[static_cast<std::size_t>(topic)])
      practice(kc, cfg_.material_gain * latent_.learn_rate.at(kc));
    now_ += 120.0;
  }

  int answer(StudentHistory& h, const std::string& q, int topic, std::uint8_t ctx, double theta, Rng& rng) {
    const auto& info = course_.meta.questions.at(q);
    double skill = 0.0;
    for (const auto& kc : info.kc_ids) skill += effective(kc);
    skill /= static_cast<double>(info.kc_ids.size());
    const double b = offset_ + latent_.intrinsic.at(q);
    const double z = theta + skill + cfg_.context_effect[ctx] - b;
    const double p = cfg_.guess + (1.0 - cfg_.guess - cfg_.slip) * logistic(z);
    const int y = rng.bernoulli(p) ? 1 : 0;
    const double rt_s = std::clamp(
        cfg_.response_time_median_s * std::exp(0.3 * (b - theta - skill) + cfg_.response_time_sigma * rng.normal()),
        2.0, 600.0);

    Interaction x = base(Activity::question, topic, ctx);
    x.student_id = h.student_id;
    x.question_id = q;
    x.kc_ids = info.kc_ids;
    x.difficulty_rating = info.difficulty_rating;
    x.correct = static_cast<std::uint8_t>(y);
    x.response_time_ms = static_cast<std::int64_t>(std::llround(rt_s * 1000.0));
    h.interactions.push_back(std::move(x));

    now_ += rt_s;
    for (const auto& kc : info.kc_ids) practice(kc, latent_.learn_rate.at(kc));
    now_ += rng.uniform(5.0, 60.0);
    return y;
  }

  const SyntheticCourse& course_;
  const Latent& latent_;
  const SynthConfig& cfg_;
  double offset_;
  std::unordered_map<std::string, SkillTrace> skills_;
  std::optional<std::int64_t> prev_time_;
  double now_ = 0.0;
};

Latent latent_of(const SyntheticCourse& c) {
  Latent l;
  for (const auto& [q, b] : c.question_difficulty) {
    l.question_ids.push_back(q);
    l.intrinsic[q] = b - c.course_offset;
  }
  for (const auto& [k, r] : c.kc_learn_rate) l.learn_rate[k] = r;
  l.topic_kcs.resize(static_cast<std::size_t>(c.meta.topic_count));
  for (const auto& [k, t] : c.kc_topic) l.topic_kcs[static_cast<std::size_t>(t)].push_back(k);
  return l;
}

std::vector<StudentHistory> simulate(const SyntheticCourse& course, const Latent& latent, const SynthConfig& cfg,
                                     double offset, int n, std::uint64_t seed, GroundTruth* truth) {
  StudentSimulator sim(course, latent, cfg, offset);
  std::vector<StudentHistory> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    const std::string id = padded(course.meta.course_id + "-S", i + 1, 4);
    double ability = 0.0;
    out.push_back(sim.run(id, rng, &ability));
    if (truth) truth->student_ability[id] = ability;
  }
  return out;
}

double correctness(const std::vector<StudentHistory>& hs) {
  double right = 0, total = 0;
  for (const auto& h : hs)
    for (const auto& x : h.interactions)
      if (x.is_question()) {
        right += *x.correct;
        total += 1;
      }
  return total > 0 ? right / total : 0.0;
}

}  // namespace

void SynthConfig::validate() const {
  if (course_count < 1 || kcs_per_course < 1 || questions_per_course < 1 || topics_per_course < 1 ||
      students_per_course < 1)
    throw ConfigError("synthetic counts must be positive");
  if (kcs_per_course < topics_per_course || questions_per_course < topics_per_course)
    throw ConfigError("need at least one KC and one question per topic");
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(second_kc_probability) || !prob(guess) || !prob(slip) || guess + slip >= 1.0 ||
      !prob(video_probability) || !prob(reading_probability) || !prob(dropout_fraction) ||
      !prob(correctness_high) || !prob(correctness_low))
    throw ConfigError("synthetic probabilities must lie in [0, 1] with guess + slip < 1");
  if (correctness_low > correctness_high) throw ConfigError("correctness_low exceeds correctness_high");
  if (ability_sd < 0 || ability_drift_sd < 0 || session_shift_sd < 0 || kc_difficulty_sd < 0 || question_difficulty_sd < 0 || rating_noise_sd < 0 ||
      learn_rate_mean <= 0 || learn_rate_sd < 0 || forgetting_days <= 0 || session_gap_mean_h < 0 ||
      response_time_median_s <= 0 || calibration_students < 1)
    throw ConfigError("synthetic scale parameters out of range");
  for (int q : context_questions)
    if (q < 0) throw ConfigError("context question counts must be non-negative");
}

SyntheticCourse generate_course(const SynthConfig& cfg, int course_index, std::uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(course_index), 1}));
  SyntheticCourse c;
  c.course_index = course_index;
  const std::string cid = "C" + std::to_string(course_index + 1);
  c.meta.course_id = cid;
  c.meta.topic_count = cfg.topics_per_course;
  const int T = cfg.topics_per_course, K = cfg.kcs_per_course, Q = cfg.questions_per_course;

  const double lr_sigma2 = std::log1p(cfg.learn_rate_sd * cfg.learn_rate_sd / (cfg.learn_rate_mean * cfg.learn_rate_mean));
  const double lr_mu = std::log(cfg.learn_rate_mean) - lr_sigma2 / 2.0;

  std::vector<std::vector<std::string>> topic_kcs(static_cast<std::size_t>(T));
  std::map<std::string, double> kc_effect;
  for (int k = 0; k < K; ++k) {
    const std::string id = padded(cid + "-K", k + 1, 3);
    const int topic = k * T / K;
    c.meta.kcs.insert(id);
    c.kc_topic[id] = topic;
    topic_kcs[static_cast<std::size_t>(topic)].push_back(id);
    kc_effect[id] = rng.normal(0.0, cfg.kc_difficulty_sd);
    c.kc_learn_rate[id] = std::exp(rng.normal(lr_mu, std::sqrt(lr_sigma2)));
  }
  for (int t = 1; t < T; ++t) {
    auto prev = topic_kcs[static_cast<std::size_t>(t - 1)];
    for (const auto& kc : topic_kcs[static_cast<std::size_t>(t)]) {
      rng.shuffle(prev);
      const std::size_t n = std::min<std::size_t>(prev.size(), 1 + rng.below(2));
      for (std::size_t i = 0; i < n; ++i) c.meta.kc_prereq_edges.insert({prev[i], kc});
    }
  }

  c.topic_questions.assign(static_cast<std::size_t>(T), {});
  std::map<std::string, double> intrinsic;
  for (int j = 0; j < Q; ++j) {
    const std::string id = padded(cid + "-Q", j + 1, 4);
    const int topic = j * T / Q;
    const auto& own = topic_kcs[static_cast<std::size_t>(topic)];
    QuestionInfo info;
    info.kc_ids.push_back(own[rng.below(own.size())]);
    if (rng.bernoulli(cfg.second_kc_probability)) {
      std::vector<std::string> earlier;
      for (int t = 0; t <= topic; ++t)
        for (const auto& k : topic_kcs[static_cast<std::size_t>(t)])
          if (k != info.kc_ids.front()) earlier.push_back(k);
      if (!earlier.empty()) info.kc_ids.push_back(earlier[rng.below(earlier.size())]);
    }
    std::sort(info.kc_ids.begin(), info.kc_ids.end());
    double beta = 0.0;
    for (const auto& k : info.kc_ids) beta += kc_effect[k];
    intrinsic[id] = beta / static_cast<double>(info.kc_ids.size()) + rng.normal(0.0, cfg.question_difficulty_sd);
    c.meta.questions[id] = info;
    c.topic_questions[static_cast<std::size_t>(topic)].push_back(id);
  }

  const double span = cfg.course_count > 1 ? static_cast<double>(course_index) / (cfg.course_count - 1) : 0.0;
  c.target_correctness = cfg.correctness_high - (cfg.correctness_high - cfg.correctness_low) * span;

  // Bisection on the course offset with a fixed calibration cohort; correctness
  // falls as the offset grows. 14 halvings of [-6, 6] leave an offset error
  // below 1e-3, far inside the cohort's sampling noise.
  for (const auto& [q, b] : intrinsic) c.question_difficulty[q] = b;
  const Latent latent = latent_of(c);
  const std::uint64_t cal_seed = derive_seed(seed, {static_cast<std::uint64_t>(course_index), 0xca1});
  double lo = -6.0, hi = 6.0;
  for (int it = 0; it < 14; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double rate = correctness(simulate(c, latent, cfg, mid, cfg.calibration_students, cal_seed, nullptr));
    if (rate > c.target_correctness) lo = mid;
    else hi = mid;
  }
  c.course_offset = 0.5 * (lo + hi);

  Rng rating_rng(derive_seed(seed, {static_cast<std::uint64_t>(course_index), 2}));
  for (auto& [q, info] : c.meta.questions) {
    const double b = intrinsic[q] + c.course_offset;
    c.question_difficulty[q] = b;
    const double noisy = b + rating_rng.normal(0.0, cfg.rating_noise_sd);
    const long r = std::lround(kMinDifficulty + (kMaxDifficulty - kMinDifficulty) * logistic(1.2 * noisy));
    info.difficulty_rating = static_cast<int>(std::clamp<long>(r, kMinDifficulty, kMaxDifficulty));
  }
  return c;
}

Dataset simulate_students(const SyntheticCourse& course, const SynthConfig& cfg, int n, std::uint64_t seed,
                          GroundTruth* truth) {
  cfg.validate();
  if (n < 1) throw ConfigError("need at least one student");
  const Latent latent = latent_of(course);
  return Dataset(course.meta, simulate(course, latent, cfg, course.course_offset, n, seed, truth));
}

SyntheticSuite generate_transfer_suite(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SyntheticSuite s;
  for (int i = 0; i < cfg.course_count; ++i) {
    s.courses.push_back(generate_course(cfg, i, seed));
    GroundTruth gt;
    s.datasets.push_back(simulate_students(s.courses.back(), cfg, cfg.students_per_course,
                                           derive_seed(seed, {static_cast<std::uint64_t>(i), 3}), &gt));
    s.truth.push_back(std::move(gt));
  }
  return s;
}

void write_ground_truth(std::ostream& out, const SyntheticSuite& suite) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "kind,course_id,id,value\n";
  for (std::size_t i = 0; i < suite.courses.size(); ++i) {
    const auto& c = suite.courses[i];
    const auto& cid = c.meta.course_id;
    out << "course_offset," << cid << ',' << cid << ',' << num(c.course_offset) << '\n';
    out << "target_correctness," << cid << ',' << cid << ',' << num(c.target_correctness) << '\n';
    for (const auto& [q, b] : c.question_difficulty) out << "question_difficulty," << cid << ',' << q << ',' << num(b) << '\n';
    for (const auto& [k, r] : c.kc_learn_rate) out << "kc_learn_rate," << cid << ',' << k << ',' << num(r) << '\n';
    if (i < suite.truth.size())
      for (const auto& [s, a] : suite.truth[i].student_ability)
        out << "student_ability," << cid << ',' << s << ',' << num(a) << '\n';
  }
}

std::vector<std::filesystem::path> write_suite(const SyntheticSuite& suite, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const auto& d : suite.datasets) {
    const auto p = dir / (d.course_id() + ".csv");
    write_log_csv(p, d);
    written.push_back(p);
  }
  std::vector<const CourseMeta*> metas;
  for (const auto& c : suite.courses) metas.push_back(&c.meta);
  auto open = [&](const std::string& name) {
    const auto p = dir / name;
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    written.push_back(p);
    return out;
  };
  {
    auto out = open("registry.csv");
    write_registry_csv(out, metas);
  }
  {
    auto out = open("prereqs.csv");
    write_prereq_csv(out, metas);
  }
  {
    auto out = open("ground_truth.csv");
    write_ground_truth(out, suite);
  }
  return written;
}

}  // namespace ktransfer
