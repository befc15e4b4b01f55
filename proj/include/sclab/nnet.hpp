#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sclab/dataset.hpp"
#include "sclab/scheduler.hpp"
#include "sclab/scoring.hpp"
#include "sclab/vec.hpp"

namespace sclab {

enum class Activation { Elu, Relu };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Dense feed-forward softmax classifier.
struct DenseNetwork {
  std::vector<int> widths;                 // input, hidden..., classes
  Activation activation = Activation::Elu;
  std::vector<std::vector<double>> weights;  // per layer, row-major out x in
  std::vector<Vec> biases;

  static DenseNetwork create(std::vector<int> widths, Activation activation,
                             std::uint64_t seed);

  std::size_t parameter_count() const;
  int input_width() const { return widths.front(); }
  int num_classes() const { return widths.back(); }
  bool parameters_finite() const;
};

// Gradient (or any buffer) with the network's parameter shape.
struct ParamBlock {
  std::vector<std::vector<double>> weights;
  std::vector<Vec> biases;

  static ParamBlock zeros_like(const DenseNetwork& net);
  Vec flatten() const;
};

Vec forward(const DenseNetwork& net, const Vec& input);

// Activation of the last hidden layer, the transfer-embedding locus.
Vec penultimate_activation(const DenseNetwork& net, const Vec& input);

// Mean cross-entropy over the batch plus l2 * ||weights||^2; gradient is
// exact for that objective.
double loss_and_gradient(const DenseNetwork& net,
                         const std::vector<const Vec*>& inputs,
                         const std::vector<int>& labels, double l2,
                         ParamBlock* gradient);

double loss_and_gradient(const DenseNetwork& net, const std::vector<Vec>& inputs,
                         const std::vector<int>& labels, double l2,
                         ParamBlock* gradient);

struct OptimizerState {
  enum class Kind { Sgd, Momentum, Adam };

  Kind kind = Kind::Sgd;
  double step_size = 0.01;
  double l2 = 0.0;
  double momentum = 0.9;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  std::uint64_t step_count = 0;
  ParamBlock first_moment;    // momentum buffer / Adam m
  ParamBlock second_moment;   // Adam v

  static OptimizerState sgd(double step_size, double l2 = 0.0);
  static OptimizerState sgd_momentum(double step_size, double mu, double l2 = 0.0);
  static OptimizerState adam(double step_size, double beta1 = 0.9,
                             double beta2 = 0.999, double epsilon = 1e-8,
                             double l2 = 0.0);
};

void optimizer_step(OptimizerState& state, DenseNetwork& net,
                    const ParamBlock& gradient);

struct StepRecord {
  std::uint64_t step = 0;
  double fraction = 1.0;
  double batch_loss = 0.0;
  bool evaluated = false;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

struct TrainingRun {
  std::string condition;   // curriculum | anti-curriculum | random-curriculum | none
  std::uint64_t seed = 0;
  std::vector<StepRecord> records;
  double final_train_accuracy = 0.0;
  double final_test_accuracy = 0.0;
  bool parameters_stayed_finite = true;
};

struct TrainOptions {
  std::uint64_t steps = 1000;
  std::uint64_t seed = 0;
  std::uint64_t eval_every = 100;
  std::size_t batch_size = 32;
  std::string condition = "none";
  // Steps at which parameter snapshots are kept (for alignment probes).
  std::vector<std::uint64_t> snapshot_steps;
};

struct TrainResult {
  TrainingRun run;
  std::vector<DenseNetwork> snapshots;   // one per requested snapshot step
};

TrainResult train_with_curriculum(DenseNetwork& net, const Dataset& data,
                                  const DifficultyRanking& ranking,
                                  const PacingSchedule& schedule,
                                  OptimizerState& optimizer,
                                  const TrainOptions& options);

double accuracy(const DenseNetwork& net, const std::vector<Vec>& inputs,
                const std::vector<int>& labels);

// Exact mean gradient over the whole set.
ParamBlock full_gradient(const DenseNetwork& net, const std::vector<Vec>& inputs,
                         const std::vector<int>& labels, double l2);

// Angle between two flattened gradients, degrees in [0, 180].
double gradient_angle(const ParamBlock& g1, const ParamBlock& g2);

struct AlignmentGroup {
  double mean_angle = 0.0;
  double standard_error = 0.0;
};

struct AlignmentCheckpointReport {
  AlignmentGroup easy;
  AlignmentGroup hard;
  double gap() const { return hard.mean_angle - easy.mean_angle; }
  double combined_se() const;
};

// For each snapshot: angle of easiest-quartile and hardest-quartile batch
// gradients against the full-set gradient, averaged over repetitions.
std::vector<AlignmentCheckpointReport> alignment_experiment(
    const std::vector<DenseNetwork>& snapshots, const Dataset& data,
    const DifficultyRanking& ranking, std::size_t batch_size,
    std::size_t repetitions, std::uint64_t seed);

// Flat little-endian float64 checkpoint with a small header.
void save_checkpoint(const DenseNetwork& net, const std::string& path);
DenseNetwork load_checkpoint(const std::string& path);

}  // namespace sclab
