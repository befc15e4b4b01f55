#include "sclab/theory.hpp"

#include <cmath>
#include <cstdio>

#include "sclab/errors.hpp"

namespace sclab {
namespace {

constexpr int kBlocks = 64;

// Splits the sample budget over fixed logical blocks, each with its own
// derived stream, and merges partial sums in block order. Results do not
// depend on how blocks are scheduled.
template <class SampleFn>
EstimatorReport accumulate(std::uint64_t n, std::uint64_t seed, SampleFn fn) {
  if (n < 2) throw contract_error("estimator: sample_count must be >= 2");
  double sum = 0.0, sumsq = 0.0;
  for (int b = 0; b < kBlocks; ++b) {
    std::uint64_t count = n / kBlocks + (static_cast<std::uint64_t>(b) < n % kBlocks ? 1 : 0);
    CounterRng rng(seed, static_cast<std::uint64_t>(b) + 1);
    double s = 0.0, s2 = 0.0;
    for (std::uint64_t i = 0; i < count; ++i) {
      double v = fn(rng);
      s += v;
      s2 += v * v;
    }
    sum += s;
    sumsq += s2;
  }
  EstimatorReport rep;
  rep.sample_count = n;
  rep.seed = seed;
  rep.estimate = sum / static_cast<double>(n);
  double var = (sumsq - static_cast<double>(n) * rep.estimate * rep.estimate) /
               (static_cast<double>(n) - 1.0);
  rep.standard_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
  return rep;
}

Vec unit_axis(const Hypothesis& optimum, const Hypothesis& w_t, double* lambda_out) {
  Vec axis = sub(optimum.weights, w_t.weights);
  double lambda = norm(axis);
  if (lambda <= 0.0) throw contract_error("estimator: w_t must differ from the optimum");
  *lambda_out = lambda;
  return scaled(axis, 1.0 / lambda);
}

void require_mc_preconditions(std::uint64_t n) {
  if (n < 10000) throw contract_error("estimator: sample_count must be >= 10^4");
}

}  // namespace

RegressionPoint sample_conditional_on_difficulty(const FeatureDensity& density,
                                                 const Hypothesis& optimum,
                                                 double psi, CounterRng& rng) {
  if (psi < 0.0) throw contract_error("psi must be nonnegative");
  Vec x = density.sample(rng);
  double y = dot(x, optimum.weights) + rng.sign() * psi;
  return RegressionPoint(std::move(x), y);
}

double closed_form_delta_psi(const FeatureDensity& density, double psi,
                             double eta, double lambda) {
  if (eta <= 0.0 || lambda <= 0.0)
    throw contract_error("closed_form_delta_psi: eta and lambda must be positive");
  if (density.kind() == FeatureDensity::Kind::UniformUInterval)
    throw not_implemented_error(
        "closed_form_delta_psi: uniform-u-interval is not supported");
  FeatureMoments m = density.moments();
  double l2 = lambda * lambda;
  return 4.0 * (eta * m.r2_cos2 * l2 - eta * eta * m.r4_cos2 * l2 -
                eta * eta * psi * psi * m.r2);
}

double step_size_bound(const FeatureDensity& density) {
  FeatureMoments m = density.moments();
  return m.r2_cos2 / m.r4_cos2;
}

EstimatorReport monte_carlo_delta_psi(const FeatureDensity& density,
                                      const Hypothesis& optimum,
                                      const Hypothesis& w_t, double psi,
                                      double eta, std::uint64_t sample_count,
                                      std::uint64_t seed) {
  require_mc_preconditions(sample_count);
  double lambda;
  unit_axis(optimum, w_t, &lambda);
  return accumulate(sample_count, seed, [&](CounterRng& rng) {
    RegressionPoint p = sample_conditional_on_difficulty(density, optimum, psi, rng);
    Hypothesis next = apply_sgd_step(w_t, p, eta);
    return convergence_sample(w_t, next, optimum);
  });
}

Lemma3Report lemma3_check(const FeatureDensity& density,
                          const Hypothesis& optimum, const Hypothesis& w_t,
                          double psi, std::uint64_t sample_count,
                          std::uint64_t seed) {
  require_mc_preconditions(sample_count);
  double lambda;
  Vec axis = unit_axis(optimum, w_t, &lambda);
  Lemma3Report rep;
  rep.r_moment = accumulate(sample_count, seed, [&](CounterRng& rng) {
    Vec x = density.sample(rng);
    return rng.sign() * psi * lambda * dot(x, axis);
  });
  rep.r3_moment = accumulate(sample_count, CounterRng::mix(seed, 3),
                             [&](CounterRng& rng) {
                               Vec x = density.sample(rng);
                               return rng.sign() * psi * lambda * norm2(x) * dot(x, axis);
                             });
  return rep;
}

namespace {

// Region coordinates lambda*u for A1..A4 and the label sign of each region.
struct FourRegions {
  double lambda_u[4];
  int label_sign[4];
  double weight[4];
  double total = 0.0;
};

FourRegions regions_at(const FeatureDensity& u_density, double psi,
                       double upsilon, double lambda) {
  FourRegions fr;
  fr.lambda_u[0] = -psi + upsilon;
  fr.lambda_u[1] = -psi - upsilon;
  fr.lambda_u[2] = psi + upsilon;
  fr.lambda_u[3] = psi - upsilon;
  fr.label_sign[0] = fr.label_sign[1] = 1;
  fr.label_sign[2] = fr.label_sign[3] = -1;
  for (int i = 0; i < 4; ++i) {
    fr.weight[i] = u_density.u_marginal_pdf(fr.lambda_u[i] / lambda);
    fr.total += fr.weight[i];
  }
  return fr;
}

}  // namespace

double nabla_statistic(const FeatureDensity& u_density, double psi,
                       double upsilon, double lambda) {
  if (lambda <= 0.0) throw contract_error("nabla_statistic: lambda must be positive");
  FourRegions fr = regions_at(u_density, psi, upsilon, lambda);
  if (fr.total <= 0.0)
    throw undefined_statistic_error("nabla_statistic: all region densities are zero");
  // weight[2] = f((psi+ups)/l), weight[3] = f((psi-ups)/l),
  // weight[0] = f((-psi+ups)/l), weight[1] = f((-psi-ups)/l)
  double nabla = (fr.weight[2] - fr.weight[3] - fr.weight[0] + fr.weight[1]) / fr.total;
  if (nabla > 1.0) nabla = 1.0;
  if (nabla < -1.0) nabla = -1.0;
  return nabla;
}

double closed_form_delta_psi_upsilon(const FeatureDensity& u_density, double psi,
                                     double upsilon, double eta, double lambda) {
  if (eta <= 0.0) throw contract_error("closed_form_delta_psi_upsilon: eta must be positive");
  double nabla = nabla_statistic(u_density, psi, upsilon, lambda);
  return 4.0 * eta * (psi * psi + upsilon * upsilon + 2.0 * psi * upsilon * nabla);
}

EstimatorReport monte_carlo_delta_given_upsilon(const FeatureDensity& u_density,
                                                const Hypothesis& optimum,
                                                const Hypothesis& w_t, double psi,
                                                double upsilon, double eta,
                                                std::uint64_t sample_count,
                                                std::uint64_t seed) {
  require_mc_preconditions(sample_count);
  if (psi < 0.0 || upsilon < 0.0)
    throw contract_error("monte_carlo_delta_given_upsilon: psi, upsilon >= 0");
  double lambda;
  Vec axis = unit_axis(optimum, w_t, &lambda);
  FourRegions fr = regions_at(u_density, psi, upsilon, lambda);
  if (fr.total <= 0.0)
    throw undefined_statistic_error(
        "monte_carlo_delta_given_upsilon: conditional law is undefined");
  double cdf[4];
  double acc = 0.0;
  for (int i = 0; i < 4; ++i) {
    acc += fr.weight[i] / fr.total;
    cdf[i] = acc;
  }
  return accumulate(sample_count, seed, [&](CounterRng& rng) {
    double t = rng.uniform();
    int region = 3;
    for (int i = 0; i < 4; ++i) {
      if (t <= cdf[i]) {
        region = i;
        break;
      }
    }
    double u = fr.lambda_u[region] / lambda;
    Vec x = u_density.sample_transverse(u, axis, rng);
    axpy(x, u, axis);
    double y = dot(x, optimum.weights) + fr.label_sign[region] * psi;
    RegressionPoint p(std::move(x), y);
    Hypothesis next = apply_sgd_step(w_t, p, eta);
    return convergence_sample(w_t, next, optimum);
  });
}

std::vector<double> delta_upsilon_derivative(const FeatureDensity& u_density,
                                             double psi, double eta,
                                             double lambda,
                                             const std::vector<double>& grid) {
  if (grid.empty()) return {};
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1])
      throw contract_error("delta_upsilon_derivative: grid must be strictly increasing");
  double support = u_density.u_support();
  std::vector<double> out;
  out.reserve(grid.size());
  for (double upsilon : grid) {
    double h = 1e-5 * std::max(1.0, std::abs(upsilon));
    if (std::isfinite(support) &&
        (psi + std::abs(upsilon) + h) / lambda >= support)
      throw boundary_error("delta_upsilon_derivative: grid reaches the support edge");
    double hi = closed_form_delta_psi_upsilon(u_density, psi, upsilon + h, eta, lambda);
    double lo = closed_form_delta_psi_upsilon(u_density, psi, upsilon - h, eta, lambda);
    out.push_back((hi - lo) / (2.0 * h));
  }
  return out;
}

namespace {

// Label-sign draw with the probe's exact-loss reweighting. `a` is
// x'(w_t - optimum).
int probe_label_sign(const LabelErrorDensity& label_error, double a,
                     double upsilon, CounterRng& rng) {
  double wp = label_error.pdf(std::abs(upsilon + a));
  double wm = label_error.pdf(std::abs(upsilon - a));
  double total = wp + wm;
  if (total <= 0.0) return rng.sign();
  return rng.uniform() < wp / total ? 1 : -1;
}

}  // namespace

std::vector<EstimatorReport> theorem3_probe(
    const FeatureDensity& density, const LabelErrorDensity& label_error,
    const Hypothesis& optimum, double delta_offset,
    const std::vector<double>& upsilon_grid, double eta,
    std::uint64_t sample_count, std::uint64_t seed) {
  if (delta_offset < 0.0) throw contract_error("theorem3_probe: offset must be >= 0");
  CounterRng dir_rng(seed, 0xD14);
  Vec dir(optimum.weights.size());
  double len = 0.0;
  while (len <= 1e-12) {
    for (auto& v : dir) v = dir_rng.gaussian();
    len = norm(dir);
  }
  Hypothesis w_t = optimum;
  axpy(w_t.weights, delta_offset / len, dir);

  std::vector<EstimatorReport> out;
  for (std::size_t gi = 0; gi < upsilon_grid.size(); ++gi) {
    double upsilon = upsilon_grid[gi];
    std::uint64_t sub_seed = CounterRng::mix(seed, gi + 1);
    out.push_back(accumulate(sample_count, sub_seed, [&](CounterRng& rng) {
      Vec x = density.sample(rng);
      double a = dot(x, w_t.weights) - dot(x, optimum.weights);
      int s = probe_label_sign(label_error, a, upsilon, rng);
      double y = dot(x, w_t.weights) + s * upsilon;
      RegressionPoint p(std::move(x), y);
      Hypothesis next = apply_sgd_step(w_t, p, eta);
      return convergence_sample(w_t, next, optimum);
    }));
    out.back().seed = seed;
  }
  return out;
}

EstimatorReport theorem3_q_statistic(const FeatureDensity& density,
                                     const LabelErrorDensity& label_error,
                                     const Hypothesis& optimum,
                                     const Hypothesis& w_t, const Vec& axis,
                                     double upsilon,
                                     std::uint64_t sample_count,
                                     std::uint64_t seed) {
  require_mc_preconditions(sample_count);
  double sum[2] = {0.0, 0.0}, sumsq[2] = {0.0, 0.0};
  std::uint64_t count[2] = {0, 0};
  for (int b = 0; b < kBlocks; ++b) {
    std::uint64_t n = sample_count / kBlocks +
                      (static_cast<std::uint64_t>(b) < sample_count % kBlocks ? 1 : 0);
    CounterRng rng(seed, static_cast<std::uint64_t>(b) + 1);
    for (std::uint64_t i = 0; i < n; ++i) {
      Vec x = density.sample(rng);
      double a = dot(x, w_t.weights) - dot(x, optimum.weights);
      int s = probe_label_sign(label_error, a, upsilon, rng);
      double v = dot(x, axis);
      int g = s > 0 ? 0 : 1;
      sum[g] += v;
      sumsq[g] += v * v;
      ++count[g];
    }
  }
  EstimatorReport rep;
  rep.sample_count = sample_count;
  rep.seed = seed;
  double mean[2] = {0.0, 0.0}, se2[2] = {0.0, 0.0};
  for (int g = 0; g < 2; ++g) {
    if (count[g] < 2) throw undefined_statistic_error("q statistic: empty label group");
    mean[g] = sum[g] / static_cast<double>(count[g]);
    double var = (sumsq[g] - static_cast<double>(count[g]) * mean[g] * mean[g]) /
                 (static_cast<double>(count[g]) - 1.0);
    se2[g] = std::max(var, 0.0) / static_cast<double>(count[g]);
  }
  rep.estimate = mean[0] - mean[1];
  rep.standard_error = std::sqrt(se2[0] + se2[1]);
  return rep;
}

std::string estimator_csv_header() {
  return "quantity,psi,upsilon,lambda,eta,estimate,stderr,n,seed\n";
}

std::string estimator_csv_row(const EstimatorRow& row) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%llu,%llu\n",
                row.quantity.c_str(), row.psi, row.upsilon, row.lambda, row.eta,
                row.report.estimate, row.report.standard_error,
                static_cast<unsigned long long>(row.report.sample_count),
                static_cast<unsigned long long>(row.report.seed));
  return buf;
}

}  // namespace sclab
