#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sclab/dataset.hpp"
#include "sclab/nnet.hpp"
#include "sclab/scheduler.hpp"
#include "sclab/scoring.hpp"

namespace sclab {

struct SyntheticTask {
  int classes = 5;
  int dimension = 32;
  double sigma_gap = 2.0;
  std::size_t n = 5000;
  std::size_t test_n = 0;   // 0: n/4
};

struct CifarTask {
  std::vector<std::string> paths;
  CifarSelector selector;
  int downsample = 2;
  double test_fraction = 0.2;
};

struct NetworkSpec {
  std::vector<int> hidden = {48};
  std::string activation = "elu";
};

struct OptimizerSpec {
  std::string kind = "sgd";   // sgd | momentum | adam
  double step_size = 0.05;
  double momentum = 0.9;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
};

struct ScheduleSpec {
  std::string mode = "fixed";        // fixed | adaptive
  std::vector<double> fractions;     // empty: default quarters
  AdaptiveParams adaptive;
};

struct ExperimentConfig {
  bool use_cifar = false;
  SyntheticTask synthetic;
  CifarTask cifar;
  std::vector<std::string> conditions = {"curriculum", "anti-curriculum",
                                         "random-curriculum", "none"};
  NetworkSpec student;
  NetworkSpec teacher;               // hidden empty: 4x student widths
  OptimizerSpec optimizer;
  ScheduleSpec schedule;
  std::vector<double> l2_sweep = {0.0};
  std::vector<std::uint64_t> seeds = {1};
  std::uint64_t steps = 2000;
  std::uint64_t eval_every = 100;
  std::size_t batch_size = 32;
  double transfer_l2 = 1e-3;
  int transfer_epochs = 50;
  int teacher_step_multiple = 4;
  int teacher_width_multiple = 4;

  nlohmann::json canonical;          // normalized form, the digest input
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// 64-bit FNV-1a of the canonical (key-sorted) JSON dump, as 16 hex chars.
// Stable under field reordering of the source file.
std::string config_digest(const ExperimentConfig& config);

struct RunRecord {
  std::string digest;
  std::string condition;
  std::uint64_t seed = 0;
  double l2 = 0.0;
  TrainingRun run;
  double wall_time_seconds = 0.0;    // informational; kept out of the CSVs
  std::string error;                 // non-empty when the sub-run failed
};

// Evaluated checkpoints of one run (columns:
// step,fraction,batch_loss,train_accuracy,test_accuracy).
std::string learning_curve_csv(const TrainingRun& run);

// Materializes the task described by the config, deterministically in seed.
Dataset build_dataset(const ExperimentConfig& config, std::uint64_t seed);

// Trains the teacher on the full distribution and scores every training
// example by linear margin on its penultimate embedding.
DifficultyRanking teacher_transfer_ranking(const ExperimentConfig& config,
                                           const Dataset& data,
                                           std::uint64_t seed);

DifficultyRanking ranking_for_condition(const DifficultyRanking& base,
                                        const std::string& condition,
                                        std::uint64_t seed);

// Full (condition x seed x l2) cross product. Per-run CSVs plus a records.csv
// index are written under out_dir/<digest>/ when out_dir is non-empty;
// sub-run failures are recorded and the sweep continues.
std::vector<RunRecord> run_experiment(const ExperimentConfig& config,
                                      const std::string& out_dir);

// Per-condition mean +/- SE test-accuracy curves on the union step grid;
// records evaluated on a different grid are resampled to the nearest
// checkpoint (flagged in the `resampled` column).
std::string report(const std::vector<RunRecord>& records);

// Gradient-alignment probe: trains a student (uniform sampling), snapshots
// at the requested epochs, and compares easy/hard quartile batch gradients
// against the full gradient. `steps_out`, when given, receives the snapshot
// steps.
std::vector<AlignmentCheckpointReport> run_alignment(
    const ExperimentConfig& config, const std::vector<int>& epochs,
    std::size_t repetitions, std::vector<std::uint64_t>* steps_out = nullptr);

std::string alignment_csv(const std::vector<std::uint64_t>& steps,
                          const std::vector<AlignmentCheckpointReport>& reports);

// Small file helpers shared by the CLI.
void ensure_directory(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace sclab
