#include "sclab/regress.hpp"

#include <algorithm>
#include <cmath>

#include "sclab/errors.hpp"

namespace sclab {

RegressionPoint::RegressionPoint(Vec x, double y) : features(std::move(x)), label(y) {
  if (!all_finite(features) || !std::isfinite(label))
    throw contract_error("RegressionPoint: non-finite entry");
}

RegressionPoint RegressionPoint::homogeneous(const Vec& raw, double y) {
  Vec x = raw;
  x.push_back(1.0);
  return RegressionPoint(std::move(x), y);
}

Hypothesis::Hypothesis(Vec w) : weights(std::move(w)) {
  if (!all_finite(weights)) throw contract_error("Hypothesis: non-finite entry");
}

const char* region_name(Region r) {
  switch (r) {
    case Region::A1: return "A1";
    case Region::A2: return "A2";
    case Region::A3: return "A3";
    case Region::A4: return "A4";
  }
  return "?";
}

double GeometryFrame::beta() const {
  double denom = lambda * r;
  double arg = denom > 0.0 ? std::min(psi / denom, 1.0) : 1.0;
  return std::acos(arg);
}

static double residual(const RegressionPoint& point, const Hypothesis& h) {
  if (point.features.size() != h.weights.size())
    throw contract_error("residual: dimension mismatch");
  return dot(point.features, h.weights) - point.label;
}

double difficulty_score(const RegressionPoint& point, const Hypothesis& optimum) {
  double e = residual(point, optimum);
  return e * e;
}

double current_loss(const RegressionPoint& point, const Hypothesis& hypothesis) {
  double e = residual(point, hypothesis);
  return e * e;
}

GradientStep gradient_step(const RegressionPoint& point,
                           const Hypothesis& hypothesis, double eta) {
  if (eta <= 0.0) throw contract_error("gradient_step: eta must be positive");
  GradientStep g;
  g.step = scaled(point.features, -2.0 * eta * residual(point, hypothesis));
  return g;
}

GradientStep gradient_step(const RegressionPoint& point,
                           const Hypothesis& hypothesis, double eta,
                           const Hypothesis& optimum) {
  GradientStep g = gradient_step(point, hypothesis, eta);
  Vec axis = sub(optimum.weights, hypothesis.weights);
  double len = norm(axis);
  if (len > 0.0) {
    double par = dot(g.step, axis) / len;
    double perp2 = std::max(norm2(g.step) - par * par, 0.0);
    g.parallel_component = par;
    g.perpendicular_norm = std::sqrt(perp2);
  }
  return g;
}

Hypothesis apply_sgd_step(const Hypothesis& hypothesis,
                          const RegressionPoint& point, double eta) {
  GradientStep g = gradient_step(point, hypothesis, eta);
  Hypothesis next = hypothesis;
  axpy(next.weights, 1.0, g.step);
  return next;
}

double convergence_sample(const Hypothesis& w_t, const Hypothesis& w_next,
                          const Hypothesis& optimum) {
  return norm2(sub(w_t.weights, optimum.weights)) -
         norm2(sub(w_next.weights, optimum.weights));
}

Hypothesis project_onto_constraint(const RegressionPoint& point,
                                   const Hypothesis& hypothesis) {
  double n2 = norm2(point.features);
  if (n2 <= 0.0)
    throw singular_geometry_error("project_onto_constraint: zero feature vector");
  Hypothesis z = hypothesis;
  axpy(z.weights, -residual(point, hypothesis) / n2, point.features);
  return z;
}

GeometryFrame build_geometry_frame(const RegressionPoint& point,
                                   const Hypothesis& w_t,
                                   const Hypothesis& optimum) {
  Vec axis = sub(optimum.weights, w_t.weights);
  double lambda = norm(axis);
  if (lambda <= 0.0)
    throw frame_undefined_error("build_geometry_frame: w_t equals the optimum");
  double r = norm(point.features);
  if (r <= 0.0)
    throw singular_geometry_error("build_geometry_frame: zero feature vector");

  GeometryFrame f;
  f.lambda = lambda;
  f.r = r;
  f.cos_theta = std::clamp(dot(point.features, axis) / (r * lambda), -1.0, 1.0);
  f.z_bar = project_onto_constraint(point, optimum);
  double e_opt = residual(point, optimum);   // x'optimum - y = -label_sign * psi
  f.psi = std::abs(e_opt);
  f.upsilon = std::abs(residual(point, w_t));
  f.label_sign = e_opt <= 0.0 ? 1 : -1;      // tie (psi = 0) resolves to +1 -> A1

  double lu = lambda * f.u();
  if (f.label_sign == 1)
    f.region = lu >= -f.psi ? Region::A1 : Region::A2;
  else
    f.region = lu >= f.psi ? Region::A3 : Region::A4;
  return f;
}

}  // namespace sclab
