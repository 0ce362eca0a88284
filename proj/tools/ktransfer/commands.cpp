#include "commands.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "ktransfer/errors.hpp"
#include "ktransfer/eval.hpp"
#include "ktransfer/ingest.hpp"
#include "ktransfer/model_io.hpp"
#include "ktransfer/report.hpp"
#include "ktransfer/synth.hpp"

namespace ktransfer::cli {

namespace fs = std::filesystem;

namespace {

void log(const std::string& msg) { std::cerr << "[ktransfer] " << msg << "\n"; }

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string csv_text(const Table& t) {
  std::ostringstream s;
  write_csv(s, t);
  return s.str();
}

std::string text_of(const Table& t) {
  std::ostringstream s;
  write_text(s, t);
  return s.str();
}

// Resolved config goes next to the results so every report can be reproduced.
void write_resolved(const ExperimentConfig& cfg, const std::string& command) {
  write_file(cfg.out / (command + "_config.json"), cfg.to_json().dump(2) + "\n");
}

void announce(const ExperimentConfig& cfg, const std::string& command) {
  log(command + ": " + (cfg.data.synthetic ? std::string("synthetic data") : "data " + cfg.data.dir.string()) +
      ", output " + cfg.out.string());
  std::istringstream lines(describe(cfg));
  for (std::string line; std::getline(lines, line);) log("  " + line);
}

std::vector<ModelSpec> specs_or(const ExperimentConfig& cfg, const std::string& fallback) {
  if (!cfg.models.empty()) return cfg.model_specs();
  ExperimentConfig c = cfg;
  c.models = nlohmann::json::array({fallback});
  return c.model_specs();
}

struct Courses {
  std::vector<Dataset> all;
  std::optional<std::size_t> target;
};

// The target is a course id or a log file; a file's course replaces any course
// of the same id from the data source.
Courses load_with_target(const ExperimentConfig& cfg) {
  Courses c;
  c.all = load_courses(cfg.data, cfg.seed);
  if (cfg.target.empty()) return c;
  const fs::path p(cfg.target);
  std::string id = cfg.target;
  if (p.extension() == ".csv" && fs::exists(p)) {
    DataSource src = cfg.data;
    if (src.synthetic) throw ConfigError("a target log file needs a file-based data source for its registry");
    src.logs = {p};
    auto extra = load_courses(src, cfg.seed);
    if (extra.size() != 1) throw ConfigError(p.string() + " must contain exactly one course");
    id = extra.front().course_id();
    auto it = std::find_if(c.all.begin(), c.all.end(), [&](const Dataset& d) { return d.course_id() == id; });
    if (it != c.all.end())
      *it = std::move(extra.front());
    else
      c.all.push_back(std::move(extra.front()));
    std::sort(c.all.begin(), c.all.end(),
              [](const Dataset& a, const Dataset& b) { return a.course_id() < b.course_id(); });
  }
  for (std::size_t i = 0; i < c.all.size(); ++i)
    if (c.all[i].course_id() == id) c.target = i;
  if (!c.target) throw ConfigError("target course '" + id + "' not found");
  return c;
}

std::vector<const Dataset*> sources_except(const std::vector<Dataset>& all, std::size_t target) {
  std::vector<const Dataset*> out;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (i != target) out.push_back(&all[i]);
  return out;
}

}  // namespace

std::string file_slug(const std::string& name) {
  std::string s;
  for (char ch : name)
    if (!std::isspace(static_cast<unsigned char>(ch))) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  return s;
}

int cmd_simulate(const SimulateArgs& a) {
  const auto& cfg = a.cfg;
  log("simulate: seed " + std::to_string(cfg.seed) + ", output " + cfg.out.string());
  const auto suite = generate_transfer_suite(cfg.data.synth, cfg.seed);
  write_suite(suite, cfg.out);
  write_resolved(cfg, "simulate");

  Table t;
  t.title = "Synthetic course summary";
  t.header = {""};
  for (const auto& d : suite.datasets) t.header.push_back(d.course_id());
  std::vector<std::string> students = {"# of students"}, questions = {"# of questions"}, kcs = {"# of KCs"},
                           topics = {"# of topics"}, resp = {"# of responses"}, avg_resp = {"avg. resp."},
                           avg_correct = {"avg. correct"};
  for (const auto& d : suite.datasets) {
    std::size_t n = 0, ok = 0;
    for (const auto& h : d.histories())
      for (const auto& x : h.interactions)
        if (x.is_question()) {
          ++n;
          ok += x.correct.value_or(0);
        }
    students.push_back(std::to_string(d.student_count()));
    questions.push_back(std::to_string(d.meta().questions.size()));
    kcs.push_back(std::to_string(d.meta().kcs.size()));
    topics.push_back(std::to_string(d.meta().topic_count));
    resp.push_back(std::to_string(n));
    avg_resp.push_back(format_number(d.student_count() ? static_cast<double>(n) / d.student_count() : 0.0, 1));
    avg_correct.push_back(format_number(n ? 100.0 * ok / n : 0.0, 2) + "%");
  }
  t.rows = {students, questions, kcs, topics, resp, avg_resp, avg_correct};
  write_file(cfg.out / "summary.csv", csv_text(t));
  write_file(cfg.out / "summary.txt", text_of(t));
  std::cout << text_of(t);
  return 0;
}

int cmd_validate(const ExperimentConfig& cfg) {
  const auto courses = load_courses(cfg.data, cfg.seed, false);
  Table t;
  t.title = "Validation";
  t.header = {"course", "students", "responses", "violations"};
  std::size_t total = 0;
  std::vector<Violation> shown;
  for (const auto& d : courses) {
    const auto v = validate_dataset(d);
    total += v.size();
    for (const auto& x : v)
      if (shown.size() < 20) shown.push_back(x);
    t.rows.push_back({d.course_id(), std::to_string(d.student_count()), std::to_string(d.question_interaction_count()),
                      std::to_string(v.size())});
  }
  std::cout << text_of(t);
  for (const auto& v : shown)
    std::cout << "  " << v.rule << " student=" << v.student_id << " index=" << v.index << ": " << v.detail << "\n";
  if (total > shown.size()) std::cout << "  ... " << (total - shown.size()) << " more\n";
  return total == 0 ? 0 : 1;
}

int cmd_train(const TrainArgs& a) {
  const auto& cfg = a.cfg;
  announce(cfg, "train");
  const auto specs = specs_or(cfg, "Best-LR");
  const auto c = load_with_target(cfg);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < c.all.size(); ++i)
    if (!c.target || *c.target == i) idx.push_back(i);

  std::vector<MetricReport> reports;
  for (const auto& spec : specs)
    for (auto i : idx) {
      log("cv " + spec.name + " on " + c.all[i].course_id());
      reports.push_back(cross_validate(c.all[i], spec, cfg.k, cfg.seed, cfg.train));
      if (a.save_models) {
        const auto m = train_model(c.all[i], spec, cfg.train);
        save_model(cfg.out / "models" / (file_slug(spec.name) + "_" + c.all[i].course_id() + ".ktm"), m);
      }
    }
  const auto lt = reference_long(reports);
  write_file(cfg.out / "reference.csv", csv_text(lt));
  write_resolved(cfg, "train");
  std::cout << text_of(reference_grid(lt));
  return 0;
}

int cmd_apply(const ApplyArgs& a) {
  const auto& cfg = a.cfg;
  announce(cfg, "apply");
  const auto c = load_with_target(cfg);

  if (cfg.mode == "pairwise") {
    for (const auto& spec : specs_or(cfg, "A-AugLR")) {
      log("pairwise " + spec.name);
      const auto r = run_pairwise_experiment(c.all, spec, cfg.k, cfg.seed, cfg.train);
      const auto lt = pairwise_long(r);
      write_file(cfg.out / ("pairwise_" + file_slug(spec.name) + ".csv"), csv_text(lt));
      std::cout << text_of(pairwise_grid(lt, "acc")) << "\n" << text_of(pairwise_grid(lt, "auc"));
    }
    write_resolved(cfg, "apply");
    return 0;
  }
  if (cfg.mode != "naive") throw ConfigError("apply supports mode naive or pairwise, not " + cfg.mode);

  NaiveTransferResult r;
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < c.all.size(); ++i)
    if (!c.target || *c.target == i) targets.push_back(i);
  for (auto t : targets) r.targets.push_back(c.all[t].course_id());

  if (!a.model_file.empty()) {
    if (!c.target) throw ConfigError("--model-file needs --target");
    const auto m = load_model(a.model_file);
    r.models = {m.spec.name};
    r.cells = {{evaluate(m.spec.name, c.all[*c.target].course_id(), predict(m, c.all[*c.target]))}};
  } else {
    for (const auto& spec : specs_or(cfg, "A-AugLR")) {
      r.models.push_back(spec.name);
      r.cells.emplace_back();
      for (auto t : targets) {
        log("naive " + spec.name + " -> " + c.all[t].course_id());
        const auto m = train_agnostic(sources_except(c.all, t), spec, cfg.train);
        r.cells.back().push_back(evaluate(spec.name, c.all[t].course_id(), apply_agnostic(m, c.all[t])));
        if (a.save_models)
          save_model(cfg.out / "models" / (file_slug(spec.name) + "_to_" + c.all[t].course_id() + ".ktm"), m);
      }
    }
  }
  const auto lt = naive_long(r);
  write_file(cfg.out / "naive.csv", csv_text(lt));
  write_resolved(cfg, "apply");
  std::cout << text_of(naive_grid(lt));
  return 0;
}

int cmd_tune(const TuneArgs& a) {
  const auto& cfg = a.cfg;
  announce(cfg, "tune");
  const auto c = load_with_target(cfg);
  InductiveOptions opts;
  opts.pilot_sizes = cfg.pilot_sizes;
  opts.seeds = cfg.seeds;
  opts.k = cfg.k;
  opts.folds_per_seed = cfg.folds_per_seed;
  opts.lambda = cfg.lambda;
  for (auto& s : opts.conventional) s.config.hyper = cfg.hyper;

  std::vector<CurvePoint> points;
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < c.all.size(); ++i)
    if (!c.target || *c.target == i) targets.push_back(i);

  if (!a.model_file.empty()) {
    if (!c.target) throw ConfigError("--model-file needs --target");
    const auto m = load_model(a.model_file);
    log("inductive " + m.spec.name + " (loaded) -> " + c.all[*c.target].course_id());
    points = run_inductive_experiment(m, c.all[*c.target], opts, cfg.train);
  } else {
    const auto specs = specs_or(cfg, "A-AugLR");
    if (specs.size() != 1) throw ConfigError("tune takes exactly one agnostic model");
    for (auto t : targets) {
      log("inductive " + specs.front().name + " -> " + c.all[t].course_id());
      auto p = run_inductive_experiment(c.all, t, specs.front(), opts, cfg.train);
      points.insert(points.end(), p.begin(), p.end());
    }
  }
  write_file(cfg.out / "curve.csv", csv_text(curve_long(points)));
  write_resolved(cfg, "tune");
  const auto summary = summarize_curve(points);
  for (auto t : targets) std::cout << text_of(curve_grid(summary, c.all[t].course_id(), "auc")) << "\n";
  return 0;
}

int cmd_report(const ReportArgs& a) {
  if (!fs::is_directory(a.in)) throw IoError("input directory not found: " + a.in.string());
  fs::create_directories(a.out);
  std::size_t found = 0;
  auto emit = [&](const Table& t, const std::string& name) {
    write_file(a.out / name, text_of(t));
    std::cout << text_of(t) << "\n";
  };

  if (fs::exists(a.in / "reference.csv")) {
    ++found;
    emit(reference_grid(read_csv_table(a.in / "reference.csv")), "reference.txt");
  }
  if (fs::exists(a.in / "naive.csv")) {
    ++found;
    emit(naive_grid(read_csv_table(a.in / "naive.csv")), "naive.txt");
  }
  std::vector<fs::path> pairwise;
  for (const auto& e : fs::directory_iterator(a.in)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("pairwise_", 0) == 0 && e.path().extension() == ".csv")
      pairwise.push_back(e.path());
  }
  std::sort(pairwise.begin(), pairwise.end());
  for (const auto& p : pairwise) {
    ++found;
    const auto lt = read_csv_table(p);
    const auto stem = p.stem().string();
    emit(pairwise_grid(lt, "acc"), stem + "_acc.txt");
    emit(pairwise_grid(lt, "auc"), stem + "_auc.txt");
  }
  if (fs::exists(a.in / "curve.csv")) {
    ++found;
    const auto summary = summarize_curve(curve_from_long(read_csv_table(a.in / "curve.csv")));
    std::vector<std::string> courses;
    for (const auto& s : summary)
      if (std::find(courses.begin(), courses.end(), s.course) == courses.end()) courses.push_back(s.course);
    for (const auto& course : courses)
      for (const std::string metric : {"acc", "auc"})
        emit(curve_grid(summary, course, metric), "curve_" + course + "_" + metric + ".txt");
    for (const auto& p : render_curve_charts(summary, a.out)) log("wrote " + p.string());
  }
  if (found == 0)
    throw IoError("no results in " + a.in.string() + " (expected reference.csv, naive.csv, pairwise_*.csv or curve.csv)");
  return 0;
}

}  // namespace ktransfer::cli
