// sclab: curriculum-learning laboratory CLI.
//
// Subcommands:
//   theory  - run the full theory verification suite, emit estimator CSVs
//   rank    - compute a transfer difficulty ranking and export it as CSV
//   train   - run the (condition x seed x l2) experiment cross product
//   fig2    - gradient-alignment probe at epoch snapshots
//   report  - aggregate per-run CSVs into mean +/- SE learning curves

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sclab/errors.hpp"
#include "sclab/harness.hpp"
#include "sclab/theory_suite.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string default_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("SCLAB_OUT"); env && *env) return env;
  return "out";
}

sclab::TheorySuiteConfig theory_config_from_file(const std::string& path) {
  sclab::TheorySuiteConfig c;
  if (path.empty()) return c;
  std::ifstream in(path);
  if (!in) throw sclab::contract_error("cannot open config " + path);
  json j;
  in >> j;
  c.d = j.value("d", c.d);
  c.sigma = j.value("sigma", c.sigma);
  c.lambda = j.value("lambda", c.lambda);
  c.eta_scale = j.value("eta_scale", c.eta_scale);
  c.samples = j.value("samples", c.samples);
  c.identity_instances = j.value("identity_instances", c.identity_instances);
  c.seed = j.value("seed", c.seed);
  if (j.contains("psi_grid")) c.psi_grid = j.at("psi_grid").get<std::vector<double>>();
  if (j.contains("upsilon_grid"))
    c.upsilon_grid = j.at("upsilon_grid").get<std::vector<double>>();
  if (j.contains("lambda_grid"))
    c.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
  c.uniform_u_half_width = j.value("uniform_u_half_width", c.uniform_u_half_width);
  c.wide_gaussian_sigma = j.value("wide_gaussian_sigma", c.wide_gaussian_sigma);
  c.informational_eta_multiple =
      j.value("informational_eta_multiple", c.informational_eta_multiple);
  return c;
}

sclab::ExperimentConfig experiment_config(const std::string& path,
                                          std::uint64_t seed_override,
                                          bool has_seed_override) {
  sclab::ExperimentConfig cfg =
      path.empty() ? sclab::parse_config(json::object()) : sclab::load_config(path);
  if (has_seed_override) cfg.seeds = {seed_override};
  return cfg;
}

// Reconstructs run records from the per-run CSVs written by `train`.
std::vector<sclab::RunRecord> load_records(const std::string& dir) {
  std::vector<sclab::RunRecord> records;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 4 &&
        name.substr(name.size() - 4) == ".csv" && name != "records.csv" &&
        name.find("_s") != std::string::npos)
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    std::string name = path.stem().string();
    std::size_t s_pos = name.rfind("_s");
    std::size_t l_pos = name.rfind("_l2");
    if (s_pos == std::string::npos || l_pos == std::string::npos || l_pos < s_pos)
      continue;
    sclab::RunRecord rec;
    rec.condition = name.substr(0, s_pos);
    rec.seed = std::stoull(name.substr(s_pos + 2, l_pos - s_pos - 2));
    rec.l2 = std::stod(name.substr(l_pos + 3));
    rec.run.condition = rec.condition;
    rec.run.seed = rec.seed;

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);   // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      sclab::StepRecord r;
      r.evaluated = true;
      if (std::sscanf(line.c_str(), "%llu,%lf,%lf,%lf,%lf",
                      reinterpret_cast<unsigned long long*>(&r.step), &r.fraction,
                      &r.batch_loss, &r.train_accuracy, &r.test_accuracy) == 5)
        rec.run.records.push_back(r);
    }
    if (!rec.run.records.empty()) {
      rec.run.final_train_accuracy = rec.run.records.back().train_accuracy;
      rec.run.final_test_accuracy = rec.run.records.back().test_accuracy;
      records.push_back(std::move(rec));
    }
  }
  return records;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"curriculum-learning laboratory"};
  app.require_subcommand(1);
  app.fallthrough();   // global flags may follow the subcommand

  std::string config_path, out_flag;
  std::uint64_t seed_override = 0;
  int jobs = 1;
  bool has_seed = false;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--out", out_flag, "output directory (default: $SCLAB_OUT or ./out)");
  auto* seed_opt = app.add_option("--seed", seed_override,
                                  "override the config seed list with one seed");
  app.add_option("--jobs", jobs, "worker count (runs are sequential when 1)")
      ->check(CLI::PositiveNumber);

  auto* cmd_theory = app.add_subcommand("theory", "run the theory verification suite");
  auto* cmd_rank = app.add_subcommand("rank", "export a transfer difficulty ranking");
  auto* cmd_train = app.add_subcommand("train", "run the experiment cross product");
  auto* cmd_fig2 = app.add_subcommand("fig2", "gradient-alignment probe");
  auto* cmd_report = app.add_subcommand("report", "aggregate run CSVs into curves");

  std::vector<int> fig2_epochs = {0, 10, 20};
  std::size_t fig2_reps = 100;
  cmd_fig2->add_option("--epochs", fig2_epochs, "snapshot epochs");
  cmd_fig2->add_option("--reps", fig2_reps, "repetitions per pool");

  std::string records_dir;
  cmd_report->add_option("--records", records_dir,
                         "directory of per-run CSVs (default: <out>/<digest>)");

  CLI11_PARSE(app, argc, argv);
  has_seed = seed_opt->count() > 0;
  const std::string out_dir = default_out_dir(out_flag);

  try {
    sclab::ensure_directory(out_dir);

    if (cmd_theory->parsed()) {
      sclab::TheorySuiteConfig cfg = theory_config_from_file(config_path);
      if (has_seed) cfg.seed = seed_override;
      sclab::TheorySuiteResult result = sclab::run_theory_suite(cfg);
      sclab::write_text_file(out_dir + "/estimators.csv",
                             sclab::theory_rows_csv(result.rows));
      sclab::write_text_file(out_dir + "/claims.csv",
                             sclab::theory_claims_csv(result.claims));
      for (const auto& c : result.claims)
        std::printf("%s %s%s - %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                    c.informational ? " (informational)" : "", c.detail.c_str());
      return result.all_passed() ? 0 : 1;
    }

    if (cmd_rank->parsed()) {
      sclab::ExperimentConfig cfg =
          experiment_config(config_path, seed_override, has_seed);
      std::uint64_t seed = cfg.seeds.front();
      sclab::Dataset data = sclab::build_dataset(cfg, seed);
      sclab::DifficultyRanking ranking =
          sclab::teacher_transfer_ranking(cfg, data, seed);
      std::string path = out_dir + "/ranking.csv";
      sclab::write_text_file(path, sclab::ranking_to_csv(ranking));
      std::printf("wrote %s (%zu examples)\n", path.c_str(), ranking.order.size());
      return 0;
    }

    if (cmd_train->parsed()) {
      sclab::ExperimentConfig cfg =
          experiment_config(config_path, seed_override, has_seed);
      std::vector<sclab::RunRecord> records = sclab::run_experiment(cfg, out_dir);
      std::string digest = sclab::config_digest(cfg);
      int failures = 0;
      for (const auto& r : records)
        if (!r.error.empty()) ++failures;
      std::printf("digest %s: %zu runs, %d failed; results in %s/%s\n",
                  digest.c_str(), records.size(), failures, out_dir.c_str(),
                  digest.c_str());
      sclab::write_text_file(out_dir + "/" + digest + "/summary.csv",
                             sclab::report(records));
      return failures == 0 ? 0 : 1;
    }

    if (cmd_fig2->parsed()) {
      sclab::ExperimentConfig cfg =
          experiment_config(config_path, seed_override, has_seed);
      std::vector<std::uint64_t> steps;
      std::vector<sclab::AlignmentCheckpointReport> reports =
          sclab::run_alignment(cfg, fig2_epochs, fig2_reps, &steps);
      std::string path = out_dir + "/alignment.csv";
      sclab::write_text_file(path, sclab::alignment_csv(steps, reports));
      for (std::size_t i = 0; i < reports.size(); ++i)
        std::printf("step %llu: easy %.3f deg, hard %.3f deg, gap %.3f\n",
                    static_cast<unsigned long long>(steps[i]),
                    reports[i].easy.mean_angle, reports[i].hard.mean_angle,
                    reports[i].gap());
      return 0;
    }

    if (cmd_report->parsed()) {
      std::string dir = records_dir;
      if (dir.empty()) {
        sclab::ExperimentConfig cfg =
            experiment_config(config_path, seed_override, has_seed);
        dir = out_dir + "/" + sclab::config_digest(cfg);
      }
      std::vector<sclab::RunRecord> records = load_records(dir);
      std::string path = out_dir + "/summary.csv";
      sclab::write_text_file(path, sclab::report(records));
      std::printf("wrote %s from %zu runs\n", path.c_str(), records.size());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
