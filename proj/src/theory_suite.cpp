#include "sclab/theory_suite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sclab/errors.hpp"
#include "sclab/rng.hpp"

namespace sclab {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Vec random_unit(int n, CounterRng& rng) {
  Vec v(n);
  double len = 0.0;
  do {
    for (auto& c : v) c = rng.gaussian();
    len = norm(v);
  } while (len < 1e-12);
  for (auto& c : v) c /= len;
  return v;
}

// Lemma 1/2/4 exercised on random instances; returns the worst error seen.
struct IdentityErrors {
  double lemma1 = 0.0;
  double lemma2 = 0.0;
  double lemma4 = 0.0;
};

IdentityErrors identity_sweep(int ambient_dim, std::uint64_t instances,
                              std::uint64_t seed) {
  CounterRng rng(seed, 0x1DE0 + static_cast<std::uint64_t>(ambient_dim));
  IdentityErrors worst;
  for (std::uint64_t i = 0; i < instances; ++i) {
    Vec x(ambient_dim), wt(ambient_dim), wbar(ambient_dim);
    for (auto& c : x) c = rng.gaussian();
    if (norm(x) < 1e-6) continue;
    for (auto& c : wt) c = rng.gaussian();
    for (auto& c : wbar) c = rng.gaussian();
    if (norm(sub(wbar, wt)) < 1e-6) continue;
    Hypothesis w_t(wt), optimum(wbar);
    RegressionPoint p(x, dot(x, wbar) + rng.gaussian());

    // Lemma 1: psi^2 = r^2 ||wbar - zbar||^2
    double psi2 = difficulty_score(p, optimum);
    Hypothesis zbar = project_onto_constraint(p, optimum);
    double lhs = norm2(p.features) * norm2(sub(wbar, zbar.weights));
    worst.lemma1 = std::max(worst.lemma1,
                            std::abs(psi2 - lhs) / std::max(1.0, psi2));

    // Lemma 2: delta = 2 lambda s_par - ||s||^2
    double eta = 0.01 + 0.1 * rng.uniform();
    GradientStep g = gradient_step(p, w_t, eta, optimum);
    Hypothesis next = apply_sgd_step(w_t, p, eta);
    double delta = convergence_sample(w_t, next, optimum);
    double lambda = norm(sub(wbar, wt));
    double pred = 2.0 * lambda * g.parallel_component.value() - norm2(g.step);
    worst.lemma2 = std::max(worst.lemma2,
                            std::abs(delta - pred) / std::max(1.0, std::abs(delta)));

    // Lemma 4: lambda*u matches the region table entry
    GeometryFrame f = build_geometry_frame(p, w_t, optimum);
    double lu = f.lambda * f.u();
    double table = 0.0;
    switch (f.region) {
      case Region::A1: table = -f.psi + f.upsilon; break;
      case Region::A2: table = -f.psi - f.upsilon; break;
      case Region::A3: table = f.psi + f.upsilon; break;
      case Region::A4: table = f.psi - f.upsilon; break;
    }
    worst.lemma4 = std::max(worst.lemma4,
                            std::abs(lu - table) / std::max(1.0, f.psi + f.upsilon));
  }
  return worst;
}

struct ClaimBuilder {
  std::vector<TheoryClaim>& claims;
  void add(std::string name, bool pass, std::string detail,
           bool informational = false) {
    claims.push_back({std::move(name), pass, informational, std::move(detail)});
  }
};

}  // namespace

TheorySuiteResult run_theory_suite(const TheorySuiteConfig& cfg) {
  TheorySuiteResult out;
  ClaimBuilder cb{out.claims};
  const int n = cfg.d + 1;  // ambient dimension

  // --- identities -----------------------------------------------------
  {
    double w1 = 0.0, w2 = 0.0, w4 = 0.0;
    for (int dim : {2, 5, 9}) {
      IdentityErrors e = identity_sweep(dim, cfg.identity_instances, cfg.seed);
      w1 = std::max(w1, e.lemma1);
      w2 = std::max(w2, e.lemma2);
      w4 = std::max(w4, e.lemma4);
    }
    cb.add("lemma1_identity", w1 <= 1e-9, "max_rel_err=" + fmt(w1));
    cb.add("lemma2_identity", w2 <= 1e-9, "max_rel_err=" + fmt(w2));
    cb.add("lemma4_identity", w4 <= 1e-9, "max_rel_err=" + fmt(w4));
  }

  FeatureDensity gauss = FeatureDensity::isotropic_gaussian(n, cfg.sigma);
  FeatureMoments gm = gauss.moments();
  const double bound = step_size_bound(gauss);
  const double eta = cfg.eta_scale * bound;

  CounterRng dir_rng(cfg.seed, 0xA715);
  Vec axis = random_unit(n, dir_rng);
  Hypothesis optimum(Vec(n, 0.0));
  Hypothesis w_t(scaled(axis, -cfg.lambda));  // ||optimum - w_t|| = lambda

  // --- Theorem 1: monotone decrease in psi, slope, MC agreement --------
  if (!cfg.psi_grid.empty()) {
    std::vector<double> closed;
    bool decreasing = true;
    double worst_slope = 0.0;
    bool mc_ok = true;
    std::string mc_detail;
    for (std::size_t i = 0; i < cfg.psi_grid.size(); ++i) {
      double psi = cfg.psi_grid[i];
      double cf = closed_form_delta_psi(gauss, psi, eta, cfg.lambda);
      closed.push_back(cf);
      out.rows.push_back({"theorem1_closed", psi, 0.0, cfg.lambda, eta,
                          {cf, 0.0, 0, cfg.seed}});
      if (i > 0 && psi > cfg.psi_grid[i - 1] && !(cf < closed[i - 1]))
        decreasing = false;

      // central difference of the closed form against -8 eta^2 E[r^2] psi
      if (psi > 0.0) {
        double h = 1e-5 * std::max(1.0, psi);
        double fd = (closed_form_delta_psi(gauss, psi + h, eta, cfg.lambda) -
                     closed_form_delta_psi(gauss, psi - h, eta, cfg.lambda)) /
                    (2.0 * h);
        double expect = -8.0 * eta * eta * gm.r2 * psi;
        worst_slope = std::max(worst_slope, std::abs(fd - expect) /
                                                std::max(1.0, std::abs(expect)));
      }

      EstimatorReport mc = monte_carlo_delta_psi(gauss, optimum, w_t, psi, eta,
                                                 cfg.samples, cfg.seed + i);
      out.rows.push_back({"theorem1_mc", psi, 0.0, cfg.lambda, eta, mc});
      if (std::abs(mc.estimate - cf) > 3.0 * mc.standard_error) {
        mc_ok = false;
        mc_detail += " psi=" + fmt(psi) + " dev=" + fmt(mc.estimate - cf) +
                     " se=" + fmt(mc.standard_error);
      }
    }
    cb.add("theorem1_psi_monotone", decreasing, "grid strictly decreasing");
    cb.add("theorem1_slope", worst_slope <= 1e-6,
           "max_rel_err=" + fmt(worst_slope));
    cb.add("theorem1_mc_agreement", mc_ok,
           mc_ok ? "all grid points within 3 SE" : mc_detail);
  }

  // --- Theorem 1: lambda condition (closed form signs) -----------------
  if (cfg.lambda_grid.size() >= 2) {
    auto sweep = [&](double e) {
      std::vector<double> v;
      for (double lam : cfg.lambda_grid)
        v.push_back(closed_form_delta_psi(gauss, 1.0, e, lam));
      return v;
    };
    auto nondecreasing = [](const std::vector<double>& v) {
      for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] < v[i - 1] - 1e-15) return false;
      return true;
    };
    auto decreasing = [](const std::vector<double>& v) {
      for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
      return true;
    };
    bool ok = nondecreasing(sweep(bound)) && nondecreasing(sweep(0.5 * bound)) &&
              decreasing(sweep(2.0 * bound));
    cb.add("theorem1_lambda_condition", ok,
           "non-decreasing at eta<=bound, decreasing at 2x bound");
    bool violated = decreasing(sweep(cfg.informational_eta_multiple * bound));
    cb.add("theorem1_lambda_sharpness", violated,
           "violation observed at " + fmt(cfg.informational_eta_multiple) +
               "x bound (expected)",
           /*informational=*/true);
  }

  // --- Lemma 3: signed cross moments vanish -----------------------------
  {
    bool ok = true;
    std::string detail;
    for (double psi : {0.5, 1.0, 2.0}) {
      Lemma3Report rep = lemma3_check(gauss, optimum, w_t, psi, cfg.samples,
                                      cfg.seed + 17);
      out.rows.push_back({"lemma3_r", psi, 0.0, cfg.lambda, eta, rep.r_moment});
      out.rows.push_back({"lemma3_r3", psi, 0.0, cfg.lambda, eta, rep.r3_moment});
      for (const auto& r : {rep.r_moment, rep.r3_moment})
        if (std::abs(r.estimate) > 3.0 * r.standard_error) {
          ok = false;
          detail += " psi=" + fmt(psi) + " est=" + fmt(r.estimate) +
                    " se=" + fmt(r.standard_error);
        }
    }
    cb.add("lemma3_zero_moments", ok, ok ? "all within 3 SE" : detail);
  }

  // --- nabla statistic: bounds and vanishing cases ----------------------
  FeatureDensity uint_density =
      FeatureDensity::uniform_u_interval(n, cfg.uniform_u_half_width);
  FeatureDensity wide =
      FeatureDensity::isotropic_gaussian(n, cfg.wide_gaussian_sigma);
  FeatureDensity ball = FeatureDensity::uniform_ball(n, 6.0);
  {
    bool bounded = true;
    for (const FeatureDensity* d : {&gauss, &uint_density, &ball, &wide})
      for (double psi : {0.5, 1.0, 2.0})
        for (double ups : cfg.upsilon_grid) {
          double nv = nabla_statistic(*d, psi, ups, cfg.lambda);
          if (!(nv >= -1.0 && nv <= 1.0)) bounded = false;
        }
    double at_zero = nabla_statistic(gauss, 1.0, 0.0, cfg.lambda);
    double flat = nabla_statistic(uint_density, 1.0, 1.0, cfg.lambda);
    cb.add("nabla_bounded", bounded, "all grid values in [-1,1]");
    cb.add("nabla_vanishing",
           std::abs(at_zero) <= 1e-12 && std::abs(flat) <= 1e-12,
           "upsilon=0: " + fmt(at_zero) + ", flat interior: " + fmt(flat));
  }

  // --- Theorem 2: monotone increase in upsilon, MC comparison -----------
  auto theorem2_block = [&](const FeatureDensity& dens, const std::string& tag,
                            double& agreement_worst, bool& closed_up,
                            bool& mc_up, bool& agree) {
    double b = step_size_bound(dens);
    double e = 0.01 * b;
    double er2 = dens.moments().r2;
    std::vector<double> cfv;
    std::vector<EstimatorReport> mcv;
    for (std::size_t i = 0; i < cfg.upsilon_grid.size(); ++i) {
      double ups = cfg.upsilon_grid[i];
      double cf = closed_form_delta_psi_upsilon(dens, 1.0, ups, e, cfg.lambda);
      EstimatorReport mc = monte_carlo_delta_given_upsilon(
          dens, optimum, w_t, 1.0, ups, e, cfg.samples, cfg.seed + 31 + i);
      cfv.push_back(cf);
      mcv.push_back(mc);
      out.rows.push_back(
          {"theorem2_closed_" + tag, 1.0, ups, cfg.lambda, e, {cf, 0.0, 0, cfg.seed}});
      out.rows.push_back({"theorem2_mc_" + tag, 1.0, ups, cfg.lambda, e, mc});
      double slack = 8.0 * e * e * (1.0 + ups) * (1.0 + ups) * er2;
      double dev = std::abs(mc.estimate - cf);
      double budget = 3.0 * mc.standard_error + slack;
      agreement_worst = std::max(agreement_worst, dev - budget);
      if (dev > budget) agree = false;
      if (i > 0) {
        if (!(cfv[i] > cfv[i - 1])) closed_up = false;
        double comb = std::hypot(mc.standard_error, mcv[i - 1].standard_error);
        if (!(mc.estimate > mcv[i - 1].estimate - 3.0 * comb)) mc_up = false;
      }
    }
  };
  if (cfg.upsilon_grid.size() >= 2) {
    bool closed_up = true, mc_up = true, agree = true;
    double worst = -1e300;
    theorem2_block(uint_density, "uinterval", worst, closed_up, mc_up, agree);
    theorem2_block(wide, "gaussian", worst, closed_up, mc_up, agree);
    cb.add("theorem2_closed_increasing", closed_up, "strict in upsilon");
    cb.add("theorem2_mc_increasing", mc_up, "increasing within 3 SE");
    cb.add("theorem2_mc_agreement", agree,
           "worst excess over 3 SE + slack: " + fmt(worst));
  }

  // --- Corollaries 3-4: derivative non-negative on the interior ---------
  {
    bool ok = true;
    for (const FeatureDensity* d : {&uint_density, &wide}) {
      double e = 0.01 * step_size_bound(*d);
      std::vector<double> der =
          delta_upsilon_derivative(*d, 1.0, e, cfg.lambda, cfg.upsilon_grid);
      for (double v : der)
        if (v < 0.0) ok = false;
    }
    cb.add("corollary34_derivative_nonneg", ok, "d delta / d upsilon >= 0");
  }

  // --- Theorem 3: probe near the optimum --------------------------------
  {
    LabelErrorDensity lerr = LabelErrorDensity::symmetric_gaussian(1.0);
    double e3 = 0.3 * bound;
    std::vector<double> ugrid = {0.5, 1.0, 2.0};
    bool ok = true;
    std::string detail;
    for (double offset : {0.0, 0.1 * e3 * std::sqrt(gm.r2)}) {
      std::vector<EstimatorReport> reps = theorem3_probe(
          gauss, lerr, optimum, offset, ugrid, e3, cfg.samples, cfg.seed + 53);
      for (std::size_t i = 0; i < reps.size(); ++i) {
        out.rows.push_back({"theorem3_probe", 0.0, ugrid[i], offset, e3, reps[i]});
        if (!(reps[i].estimate + 3.0 * reps[i].standard_error < 0.0)) {
          ok = false;
          detail += " offset=" + fmt(offset) + " upsilon=" + fmt(ugrid[i]) +
                    " est=" + fmt(reps[i].estimate);
        }
        if (i > 0) {
          double comb =
              std::hypot(reps[i].standard_error, reps[i - 1].standard_error);
          if (!(reps[i].estimate <= reps[i - 1].estimate + 3.0 * comb)) {
            ok = false;
            detail += " non-monotone at upsilon=" + fmt(ugrid[i]);
          }
        }
      }
    }
    EstimatorReport q = theorem3_q_statistic(gauss, lerr, optimum, optimum, axis,
                                             1.0, cfg.samples, cfg.seed + 59);
    out.rows.push_back({"theorem3_q", 0.0, 1.0, 0.0, e3, q});
    bool q_ok = std::abs(q.estimate) <= 3.0 * q.standard_error;
    cb.add("theorem3_negative_nonincreasing", ok,
           ok ? "all estimates negative, non-increasing" : detail);
    cb.add("theorem3_q_zero", q_ok,
           "est=" + fmt(q.estimate) + " se=" + fmt(q.standard_error));
  }

  return out;
}

std::string theory_rows_csv(const std::vector<EstimatorRow>& rows) {
  std::string s = estimator_csv_header();
  for (const auto& r : rows) s += estimator_csv_row(r);
  return s;
}

std::string theory_claims_csv(const std::vector<TheoryClaim>& claims) {
  std::string s = "claim,status,informational,detail\n";
  for (const auto& c : claims) {
    std::string detail = c.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    s += c.name;
    s += c.pass ? ",pass," : ",fail,";
    s += c.informational ? "1," : "0,";
    s += detail + "\n";
  }
  return s;
}

}  // namespace sclab
