#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "commands.hpp"
#include "config.hpp"

namespace {

using ktransfer::cli::ExperimentConfig;
using nlohmann::json;

// Options shared by every subcommand. Values given on the command line are
// written into an overrides document that is merged over the config file.
struct Common {
  std::string config_path;
  std::string out;
  std::string data;
  std::string mapping;
  std::vector<std::string> models;
  std::uint64_t seed = 0;
  int epochs = 0;
  double learning_rate = 0;
  std::string target;
  std::string mode;
  int k = 0;
  double lambda = 0;
  std::vector<std::size_t> pilots;
  std::vector<std::uint64_t> seeds;
  int folds_per_seed = 0;
  int students = 0;
  int courses = 0;
  std::size_t min_responses = 0;

  void add_base(CLI::App* app) {
    app->add_option("-c,--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    app->add_option("-o,--out", out, "output directory (default $KTRANSFER_OUT or ./ktransfer_out)");
    app->add_option("--seed", seed, "seed for data generation and folds");
  }
  void add_data(CLI::App* app) {
    app->add_option("-d,--data", data, "data directory, or 'synthetic'");
    app->add_option("--mapping", mapping, "column-mapping JSON for foreign log exports")->check(CLI::ExistingFile);
    app->add_option("--min-responses", min_responses, "drop students with fewer question responses");
  }
  void add_model(CLI::App* app) {
    app->add_option("-m,--model", models, "model preset name(s)")->delimiter(',');
    app->add_option("--epochs", epochs, "training epochs");
    app->add_option("--lr", learning_rate, "Adam learning rate");
    app->add_option("-t,--target", target, "target course id or log file");
  }

  json overrides(const CLI::App& app) const {
    json o = json::object();
    auto given = [&](const char* name) {
      const auto* opt = app.get_option_no_throw(name);
      return opt != nullptr && opt->count() > 0;
    };
    if (given("--out")) o["out"] = out;
    if (given("--seed")) o["seed"] = seed;
    if (given("--data")) {
      if (data == "synthetic")
        o["data"]["synthetic"] = json::object();
      else
        o["data"] = {{"dir", data}, {"synthetic", false}};
    }
    if (given("--mapping")) o["data"]["mapping"] = mapping;
    if (given("--min-responses")) o["data"]["min_responses"] = min_responses;
    if (given("--students")) o["data"]["synthetic"]["students_per_course"] = students;
    if (given("--courses")) o["data"]["synthetic"]["course_count"] = courses;
    if (given("--model")) o["models"] = models;
    if (given("--epochs")) o["train"]["epochs"] = epochs;
    if (given("--lr")) o["train"]["learning_rate"] = learning_rate;
    if (given("--target")) o["target"] = target;
    if (given("--mode")) o["mode"] = mode;
    if (given("--cv")) o["k"] = k;
    if (given("--k")) o["k"] = k;
    if (given("--lambda")) o["lambda"] = lambda;
    if (given("--pilot")) o["pilot_sizes"] = pilots;
    if (given("--seeds")) o["seeds"] = seeds;
    if (given("--folds-per-seed")) o["folds_per_seed"] = folds_per_seed;
    return o;
  }

  ExperimentConfig resolve(const CLI::App& app) const {
    json file = config_path.empty() ? json::object() : ktransfer::cli::read_json_file(config_path);
    json o = overrides(app);
    // "data": "synthetic" in the file is shorthand; expand it so overrides can merge.
    // An empty "synthetic" object merges without dropping configured keys.
    if (file.contains("data") && file["data"].is_string()) {
      const auto v = file["data"].get<std::string>();
      file["data"] = v == "synthetic" ? json{{"synthetic", json::object()}} : json{{"dir", v}};
    }
    return ktransfer::cli::resolve_config(file, o);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transferable student performance modeling"};
  app.require_subcommand(1);
  Common c;

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic multi-course suite");
  c.add_base(simulate);
  simulate->add_option("--students", c.students, "students per course");
  simulate->add_option("--courses", c.courses, "number of courses");

  auto* validate = app.add_subcommand("validate", "check log files against the data rules");
  c.add_base(validate);
  c.add_data(validate);

  bool save_models = false;
  auto* train = app.add_subcommand("train", "within-course k-fold reference runs");
  c.add_base(train);
  c.add_data(train);
  c.add_model(train);
  train->add_option("--cv", c.k, "number of folds");
  train->add_flag("--save-models", save_models, "also fit each model on the full course and save it");

  std::string model_file;
  auto* apply = app.add_subcommand("apply", "naive (or pairwise) transfer to target courses");
  c.add_base(apply);
  c.add_data(apply);
  c.add_model(apply);
  apply->add_option("--mode", c.mode, "naive or pairwise")->check(CLI::IsMember({"naive", "pairwise"}));
  apply->add_option("--k", c.k, "folds for the pairwise diagonal");
  apply->add_option("--model-file", model_file, "pre-trained agnostic model")->check(CLI::ExistingFile);
  apply->add_flag("--save-models", save_models, "save every trained agnostic model");

  auto* tune = app.add_subcommand("tune", "inductive transfer learning curves over pilot sizes");
  c.add_base(tune);
  c.add_data(tune);
  c.add_model(tune);
  tune->add_option("--pilot", c.pilots, "pilot sizes, e.g. 0,5,10,25")->delimiter(',');
  tune->add_option("--lambda", c.lambda, "prior strength");
  tune->add_option("--seeds", c.seeds, "pilot sampling seeds")->delimiter(',');
  tune->add_option("--k", c.k, "folds");
  tune->add_option("--folds-per-seed", c.folds_per_seed, "test folds per seed");
  tune->add_option("--model-file", model_file, "pre-trained agnostic model")->check(CLI::ExistingFile);

  std::string report_in, report_out;
  auto* report = app.add_subcommand("report", "render tables and charts from result CSVs");
  report->add_option("-i,--in", report_in, "directory with result CSVs (default: output directory)");
  report->add_option("-o,--out", report_out, "where to write rendered files (default: input directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*simulate) {
      ktransfer::cli::SimulateArgs a{c.resolve(*simulate)};
      return ktransfer::cli::cmd_simulate(a);
    }
    if (*validate) return ktransfer::cli::cmd_validate(c.resolve(*validate));
    if (*train) return ktransfer::cli::cmd_train({c.resolve(*train), save_models});
    if (*apply) return ktransfer::cli::cmd_apply({c.resolve(*apply), model_file, save_models});
    if (*tune) return ktransfer::cli::cmd_tune({c.resolve(*tune), model_file});
    if (*report) {
      std::filesystem::path in = report_in;
      if (in.empty()) in = ktransfer::cli::resolve_config(json::object(), json::object()).out;
      return ktransfer::cli::cmd_report({in, report_out.empty() ? in : std::filesystem::path(report_out)});
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
