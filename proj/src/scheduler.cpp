#include "sclab/scheduler.hpp"

#include <algorithm>
#include <cmath>

#include "sclab/errors.hpp"
#include "sclab/rng.hpp"

namespace sclab {

void PacingSchedule::validate() const {
  if (phases.empty()) throw contract_error("PacingSchedule: no phases");
  double prev = 0.0;
  for (const auto& p : phases) {
    if (p.exposed_fraction <= prev || p.exposed_fraction > 1.0)
      throw contract_error("PacingSchedule: fractions must be strictly increasing in (0,1]");
    prev = p.exposed_fraction;
    if (mode == Mode::Fixed && p.duration_steps == 0 && &p != &phases.back())
      throw contract_error("PacingSchedule: fixed-mode durations must be positive");
  }
  if (phases.back().exposed_fraction != 1.0)
    throw contract_error("PacingSchedule: final phase must expose the full set");
}

PacingSchedule PacingSchedule::default_fixed(std::uint64_t total_steps) {
  PacingSchedule s;
  s.mode = Mode::Fixed;
  std::uint64_t quarter = std::max<std::uint64_t>(total_steps / 4, 1);
  s.phases = {{0.25, quarter}, {0.5, quarter}, {0.75, quarter}, {1.0, 0}};
  s.validate();
  return s;
}

PacingSchedule PacingSchedule::default_adaptive() {
  PacingSchedule s;
  s.mode = Mode::Adaptive;
  s.phases = {{0.25, 0}, {0.5, 0}, {0.75, 0}, {1.0, 0}};
  s.adaptive = AdaptiveParams{};
  s.validate();
  return s;
}

SamplingDistribution distribution_for_phase(const DifficultyRanking& ranking,
                                            double exposed_fraction) {
  if (exposed_fraction <= 0.0 || exposed_fraction > 1.0)
    throw contract_error("distribution_for_phase: fraction must be in (0,1]");
  const std::size_t n = ranking.order.size();
  if (n == 0) throw contract_error("distribution_for_phase: empty ranking");
  std::size_t exposed = static_cast<std::size_t>(
      std::ceil(exposed_fraction * static_cast<double>(n)));
  exposed = std::min(exposed, n);
  SamplingDistribution d;
  d.probabilities.assign(n, 0.0);
  double p = 1.0 / static_cast<double>(exposed);
  for (std::size_t pos = 0; pos < exposed; ++pos)
    d.probabilities[ranking.order[pos]] = p;
  d.cumulative.resize(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += d.probabilities[i];
    d.cumulative[i] = acc;
  }
  d.cumulative.back() = 1.0;
  return d;
}

double advance_fixed(const PacingSchedule& schedule, std::uint64_t step_counter) {
  if (schedule.mode != PacingSchedule::Mode::Fixed)
    throw contract_error("advance_fixed: schedule is not fixed-mode");
  std::uint64_t start = 0;
  for (std::size_t i = 0; i + 1 < schedule.phases.size(); ++i) {
    start += schedule.phases[i].duration_steps;
    if (step_counter < start) return schedule.phases[i].exposed_fraction;
  }
  return schedule.phases.back().exposed_fraction;
}

namespace {

std::vector<double> window_means(const std::vector<double>& losses,
                                 std::uint64_t window) {
  std::vector<double> means;
  for (std::size_t start = 0; start + window <= losses.size(); start += window) {
    double s = 0.0;
    for (std::size_t i = 0; i < window; ++i) s += losses[start + i];
    means.push_back(s / static_cast<double>(window));
  }
  return means;
}

}  // namespace

bool advance_adaptive(const PacingSchedule& schedule,
                      const std::vector<double>& loss_history) {
  if (schedule.mode != PacingSchedule::Mode::Adaptive)
    throw contract_error("advance_adaptive: schedule is not adaptive-mode");
  const auto& p = schedule.adaptive;
  if (loss_history.size() < p.loss_window) return false;
  std::vector<double> means = window_means(loss_history, p.loss_window);
  if (means.size() < static_cast<std::size_t>(p.patience) + 1) return false;
  // The latest `patience` window transitions must all have stalled.
  for (std::size_t j = means.size() - p.patience; j < means.size(); ++j) {
    double prev = means[j - 1];
    double drop = prev != 0.0 ? (prev - means[j]) / std::abs(prev) : 0.0;
    if (drop >= p.improvement_threshold) return false;
  }
  return true;
}

AdaptiveController::AdaptiveController(const PacingSchedule& schedule)
    : schedule_(schedule) {
  if (schedule.mode != PacingSchedule::Mode::Adaptive)
    throw contract_error("AdaptiveController: schedule is not adaptive-mode");
  schedule_.validate();
}

double AdaptiveController::fraction() const {
  return schedule_.phases[std::min(phase_, schedule_.phases.size() - 1)].exposed_fraction;
}

double AdaptiveController::observe(double loss) {
  window_sum_ += loss;
  if (++window_count_ >= schedule_.adaptive.loss_window) {
    double mean = window_sum_ / static_cast<double>(window_count_);
    if (has_previous_window_) {
      double drop = previous_window_mean_ != 0.0
                        ? (previous_window_mean_ - mean) / std::abs(previous_window_mean_)
                        : 0.0;
      if (drop < schedule_.adaptive.improvement_threshold)
        ++stalled_windows_;
      else
        stalled_windows_ = 0;
      if (stalled_windows_ >= schedule_.adaptive.patience &&
          phase_ + 1 < schedule_.phases.size()) {
        ++phase_;
        stalled_windows_ = 0;
        has_previous_window_ = false;
        window_sum_ = 0.0;
        window_count_ = 0;
        return fraction();
      }
    }
    previous_window_mean_ = mean;
    has_previous_window_ = true;
    window_sum_ = 0.0;
    window_count_ = 0;
  }
  return fraction();
}

std::vector<std::size_t> sample_batch(const SamplingDistribution& distribution,
                                      std::size_t batch_size, std::uint64_t seed,
                                      std::uint64_t step) {
  if (batch_size < 1) throw contract_error("sample_batch: batch_size must be >= 1");
  if (distribution.cumulative.empty())
    throw contract_error("sample_batch: empty distribution");
  CounterRng rng(CounterRng::mix(seed, step), 0xBA7C);
  std::vector<std::size_t> batch(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    double t = rng.uniform();
    auto it = std::lower_bound(distribution.cumulative.begin(),
                               distribution.cumulative.end(), t);
    if (it == distribution.cumulative.end()) --it;
    std::size_t idx = static_cast<std::size_t>(it - distribution.cumulative.begin());
    // Exact ties on a shared prefix sum must not select a zero-mass index.
    while (idx + 1 < distribution.probabilities.size() &&
           distribution.probabilities[idx] == 0.0)
      ++idx;
    batch[i] = idx;
  }
  return batch;
}

}  // namespace sclab
