#pragma once

#include <cstdint>
#include <vector>

#include "sclab/scoring.hpp"

namespace sclab {

struct PacingPhase {
  double exposed_fraction = 1.0;           // in (0, 1]
  std::uint64_t duration_steps = 0;        // fixed mode; last phase runs forever
};

struct AdaptiveParams {
  std::uint64_t loss_window = 50;          // steps per window
  double improvement_threshold = 0.02;     // relative drop that counts as progress
  int patience = 2;                        // stalled windows before advancing
};

struct PacingSchedule {
  enum class Mode { Fixed, Adaptive };

  Mode mode = Mode::Fixed;
  std::vector<PacingPhase> phases;         // fractions strictly increasing to 1.0
  AdaptiveParams adaptive;

  void validate() const;

  // Fractions {0.25, 0.5, 0.75, 1.0}, each a quarter of the budget except the
  // terminal phase which runs to completion.
  static PacingSchedule default_fixed(std::uint64_t total_steps);
  static PacingSchedule default_adaptive();
};

struct SamplingDistribution {
  std::vector<double> probabilities;
  std::vector<double> cumulative;          // prefix sums for inverse-CDF draws
};

// Uniform over the easiest ceil(fraction * n) examples of the ranking.
SamplingDistribution distribution_for_phase(const DifficultyRanking& ranking,
                                            double exposed_fraction);

// Fraction of the phase containing step_counter; 1.0 after the last phase.
double advance_fixed(const PacingSchedule& schedule, std::uint64_t step_counter);

// Pure decision rule on a loss history: advance when the latest window mean
// failed to improve on its predecessor by the threshold, for `patience`
// consecutive window boundaries.
bool advance_adaptive(const PacingSchedule& schedule,
                      const std::vector<double>& loss_history);

// Stateful wrapper used by training loops; observes one loss per step.
class AdaptiveController {
 public:
  explicit AdaptiveController(const PacingSchedule& schedule);

  double observe(double loss);             // returns the fraction for the next step
  double fraction() const;

 private:
  const PacingSchedule& schedule_;
  std::size_t phase_ = 0;
  int stalled_windows_ = 0;
  double previous_window_mean_ = 0.0;
  bool has_previous_window_ = false;
  double window_sum_ = 0.0;
  std::uint64_t window_count_ = 0;
};

// i.i.d. with-replacement draws; deterministic in (seed, step).
std::vector<std::size_t> sample_batch(const SamplingDistribution& distribution,
                                      std::size_t batch_size, std::uint64_t seed,
                                      std::uint64_t step);

}  // namespace sclab
