#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sclab/density.hpp"
#include "sclab/regress.hpp"

namespace sclab {

struct EstimatorReport {
  double estimate = 0.0;
  double standard_error = 0.0;
  std::uint64_t sample_count = 0;
  std::uint64_t seed = 0;
};

// Draws x from the feature law and assigns y = x'optimum +/- psi with equal
// probability, independent of x.
RegressionPoint sample_conditional_on_difficulty(const FeatureDensity& density,
                                                 const Hypothesis& optimum,
                                                 double psi, CounterRng& rng);

// Expected one-step convergence rate at fixed difficulty, from the moment
// expansion: 4[eta E[r^2 l^2 cos^2] - eta^2 E[r^4 l^2 cos^2] - eta^2 psi^2 E[r^2]].
double closed_form_delta_psi(const FeatureDensity& density, double psi,
                             double eta, double lambda);

// Largest step size under which the rate still grows with lambda.
double step_size_bound(const FeatureDensity& density);

EstimatorReport monte_carlo_delta_psi(const FeatureDensity& density,
                                      const Hypothesis& optimum,
                                      const Hypothesis& w_t, double psi,
                                      double eta, std::uint64_t sample_count,
                                      std::uint64_t seed);

// Monte Carlo of the signed cross moments that symmetry forces to zero.
struct Lemma3Report {
  EstimatorReport r_moment;    // E[(+/-psi) r lambda cos]
  EstimatorReport r3_moment;   // E[(+/-psi) r^3 lambda cos]
};

Lemma3Report lemma3_check(const FeatureDensity& density,
                          const Hypothesis& optimum, const Hypothesis& w_t,
                          double psi, std::uint64_t sample_count,
                          std::uint64_t seed);

// Density-contrast statistic over the four region coordinates; always in [-1, 1].
double nabla_statistic(const FeatureDensity& u_density, double psi,
                       double upsilon, double lambda);

// First-order rate at fixed (psi, upsilon): 4 eta (psi^2 + upsilon^2 + 2 psi
// upsilon nabla).
double closed_form_delta_psi_upsilon(const FeatureDensity& u_density, double psi,
                                     double upsilon, double eta, double lambda);

// Samples the four-region discrete mixture at fixed (psi, upsilon), applies
// one SGD step and averages the convergence samples.
EstimatorReport monte_carlo_delta_given_upsilon(const FeatureDensity& u_density,
                                                const Hypothesis& optimum,
                                                const Hypothesis& w_t, double psi,
                                                double upsilon, double eta,
                                                std::uint64_t sample_count,
                                                std::uint64_t seed);

// Central finite differences of the closed form over an upsilon grid.
std::vector<double> delta_upsilon_derivative(const FeatureDensity& u_density,
                                             double psi, double eta,
                                             double lambda,
                                             const std::vector<double>& grid);

// Fixed-loss probe near the optimum: w_t = optimum + offset * random
// direction; labels reweighted by the error density so the loss is exactly
// upsilon. One report per grid value.
std::vector<EstimatorReport> theorem3_probe(
    const FeatureDensity& density, const LabelErrorDensity& label_error,
    const Hypothesis& optimum, double delta_offset,
    const std::vector<double>& upsilon_grid, double eta,
    std::uint64_t sample_count, std::uint64_t seed);

// Signed directional statistic that symmetry zeroes at w_t = optimum:
// E[x . axis | y = x'w_t + upsilon] - E[x . axis | y = x'w_t - upsilon].
EstimatorReport theorem3_q_statistic(const FeatureDensity& density,
                                     const LabelErrorDensity& label_error,
                                     const Hypothesis& optimum,
                                     const Hypothesis& w_t, const Vec& axis,
                                     double upsilon,
                                     std::uint64_t sample_count,
                                     std::uint64_t seed);

// CSV row of an estimator table (header: quantity,psi,upsilon,lambda,eta,
// estimate,stderr,n,seed).
struct EstimatorRow {
  std::string quantity;
  double psi = 0.0;
  double upsilon = 0.0;
  double lambda = 0.0;
  double eta = 0.0;
  EstimatorReport report;
};

std::string estimator_csv_header();
std::string estimator_csv_row(const EstimatorRow& row);

}  // namespace sclab
