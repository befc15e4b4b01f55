#pragma once

#include <optional>

#include "sclab/vec.hpp"

namespace sclab {

// One labeled example (x, y). When built through homogeneous(), the last
// feature coordinate is the constant 1 of the affine model.
struct RegressionPoint {
  Vec features;
  double label = 0.0;

  RegressionPoint() = default;
  RegressionPoint(Vec x, double y);

  // Appends the constant-1 coordinate to a raw d-dimensional input.
  static RegressionPoint homogeneous(const Vec& raw, double y);
};

struct Hypothesis {
  Vec weights;

  Hypothesis() = default;
  explicit Hypothesis(Vec w);
};

// One SGD step and its decomposition along a reference axis. The
// decomposition is absent when no axis exists (w_t == optimum).
struct GradientStep {
  Vec step;
  std::optional<double> parallel_component;   // s projected on the axis
  std::optional<double> perpendicular_norm;
};

enum class Region { A1, A2, A3, A4 };

const char* region_name(Region r);

// Geometric quantities of one point relative to (w_t, optimum).
struct GeometryFrame {
  double lambda = 0.0;      // ||optimum - w_t||
  double r = 0.0;           // ||x||
  double cos_theta = 0.0;   // polar angle of x w.r.t. optimum - w_t
  Hypothesis z_bar;         // projection of optimum onto {w : x'w = y}
  double psi = 0.0;         // sqrt of the difficulty score
  double upsilon = 0.0;     // sqrt of the current-hypothesis loss
  int label_sign = 1;       // +1: y = x'optimum + psi, -1: y = x'optimum - psi
  Region region = Region::A1;

  double u() const { return r * cos_theta; }
  // Angle of the region boundary, arccos(min(psi / (lambda r), 1)).
  double beta() const;
};

// (x'optimum - y)^2, the squared difficulty.
double difficulty_score(const RegressionPoint& point, const Hypothesis& optimum);

// (x'w - y)^2 under the current hypothesis.
double current_loss(const RegressionPoint& point, const Hypothesis& hypothesis);

GradientStep gradient_step(const RegressionPoint& point,
                           const Hypothesis& hypothesis, double eta);

// Same step, decomposed relative to the axis optimum - hypothesis.
GradientStep gradient_step(const RegressionPoint& point,
                           const Hypothesis& hypothesis, double eta,
                           const Hypothesis& optimum);

Hypothesis apply_sgd_step(const Hypothesis& hypothesis,
                          const RegressionPoint& point, double eta);

// One-step decrease of the squared distance to the optimum.
double convergence_sample(const Hypothesis& w_t, const Hypothesis& w_next,
                          const Hypothesis& optimum);

// Euclidean projection of the hypothesis onto {w : x'w = y}.
Hypothesis project_onto_constraint(const RegressionPoint& point,
                                   const Hypothesis& hypothesis);

GeometryFrame build_geometry_frame(const RegressionPoint& point,
                                   const Hypothesis& w_t,
                                   const Hypothesis& optimum);

}  // namespace sclab
