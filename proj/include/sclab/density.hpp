#pragma once

#include "sclab/rng.hpp"
#include "sclab/vec.hpp"

namespace sclab {

// Moments of the feature law in the polar frame. Rotational symmetry makes
// them independent of the frame axis.
struct FeatureMoments {
  double r2 = 0.0;         // E[r^2]
  double r2_cos2 = 0.0;    // E[r^2 cos^2(theta)] = E[u^2]
  double r4_cos2 = 0.0;    // E[r^4 cos^2(theta)] = E[r^2 u^2]
};

// Rotationally symmetric feature laws, plus the compact 1D section used for
// the compact-region checks (uniform u on [-c, c], transverse mass at 0).
class FeatureDensity {
 public:
  enum class Kind { IsotropicGaussian, UniformBall, UniformUInterval };

  static FeatureDensity isotropic_gaussian(int dimension, double sigma);
  static FeatureDensity uniform_ball(int dimension, double radius);
  static FeatureDensity uniform_u_interval(int dimension, double half_width);

  Kind kind() const { return kind_; }
  int dimension() const { return dimension_; }
  double param() const { return param_; }

  // Draws a full feature vector in ambient coordinates. The u-interval
  // section has no frame-free sampler and rejects.
  Vec sample(CounterRng& rng) const;

  // Marginal density of the axis coordinate u.
  double u_marginal_pdf(double u) const;

  // Half-width of the u support (infinite for gaussian).
  double u_support() const;

  // Draws the transverse component given u, in the complement of `axis`
  // (unit vector). Gaussian: independent isotropic; ball: uniform in the
  // residual ball; u-interval: zero.
  Vec sample_transverse(double u, const Vec& axis, CounterRng& rng) const;

  FeatureMoments moments() const;

 private:
  FeatureDensity(Kind kind, int dimension, double param);

  Kind kind_;
  int dimension_;   // ambient dimension d+1
  double param_;    // sigma | radius | half-width
};

// Symmetric law of the signed label error y - x'optimum.
class LabelErrorDensity {
 public:
  enum class Kind { TwoPoint, SymmetricGaussian };

  static LabelErrorDensity two_point(double psi);
  static LabelErrorDensity symmetric_gaussian(double tau);

  Kind kind() const { return kind_; }
  double param() const { return param_; }

  // Density of the absolute error; two-point masses have no pdf and reject.
  double pdf(double abs_error) const;

  double sample(CounterRng& rng) const;

 private:
  LabelErrorDensity(Kind kind, double param) : kind_(kind), param_(param) {}

  Kind kind_;
  double param_;
};

}  // namespace sclab
