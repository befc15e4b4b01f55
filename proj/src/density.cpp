#include "sclab/density.hpp"

#include <cmath>
#include <limits>

#include "sclab/errors.hpp"

namespace sclab {
namespace {

// 32-point Gauss-Legendre on [-1, 1].
struct GaussLegendre {
  double x[32], w[32];
  GaussLegendre() {
    // Newton iteration on Legendre polynomials.
    const int n = 32;
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double z = std::cos(3.141592653589793 * (i + 0.75) / (n + 0.5));
      double pp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < n; ++j) {
          double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
        }
        pp = n * (z * p0 - p1) / (z * z - 1.0);
        double dz = p0 / pp;
        z -= dz;
        if (std::abs(dz) < 1e-15) break;
      }
      x[i] = -z;
      x[n - 1 - i] = z;
      w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
  }
};

template <class F>
double integrate(F f, double lo, double hi, int panels = 8) {
  static const GaussLegendre gl;
  double total = 0.0;
  double h = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    double a = lo + p * h;
    double mid = a + 0.5 * h, half = 0.5 * h;
    for (int i = 0; i < 32; ++i) total += gl.w[i] * half * f(mid + half * gl.x[i]);
  }
  return total;
}

Vec gaussian_vector(int n, double sigma, CounterRng& rng) {
  Vec x(n);
  for (int i = 0; i < n; ++i) x[i] = sigma * rng.gaussian();
  return x;
}

// Unit direction in the orthogonal complement of `axis`.
Vec complement_direction(const Vec& axis, CounterRng& rng) {
  for (;;) {
    Vec g = gaussian_vector(static_cast<int>(axis.size()), 1.0, rng);
    axpy(g, -dot(g, axis), axis);
    double len = norm(g);
    if (len > 1e-12) return scaled(g, 1.0 / len);
  }
}

}  // namespace

FeatureDensity::FeatureDensity(Kind kind, int dimension, double param)
    : kind_(kind), dimension_(dimension), param_(param) {
  if (dimension < 2) throw contract_error("FeatureDensity: dimension must be >= 2");
  if (param <= 0.0) throw contract_error("FeatureDensity: scale must be positive");
}

FeatureDensity FeatureDensity::isotropic_gaussian(int dimension, double sigma) {
  return FeatureDensity(Kind::IsotropicGaussian, dimension, sigma);
}

FeatureDensity FeatureDensity::uniform_ball(int dimension, double radius) {
  return FeatureDensity(Kind::UniformBall, dimension, radius);
}

FeatureDensity FeatureDensity::uniform_u_interval(int dimension, double half_width) {
  return FeatureDensity(Kind::UniformUInterval, dimension, half_width);
}

Vec FeatureDensity::sample(CounterRng& rng) const {
  switch (kind_) {
    case Kind::IsotropicGaussian:
      return gaussian_vector(dimension_, param_, rng);
    case Kind::UniformBall: {
      Vec g = gaussian_vector(dimension_, 1.0, rng);
      double len = norm(g);
      while (len <= 1e-300) {
        g = gaussian_vector(dimension_, 1.0, rng);
        len = norm(g);
      }
      double radius = param_ * std::pow(rng.uniform(), 1.0 / dimension_);
      return scaled(g, radius / len);
    }
    case Kind::UniformUInterval:
      throw not_implemented_error(
          "uniform-u-interval has no frame-free sampler; use the conditional "
          "mixture sampler");
  }
  throw not_implemented_error("FeatureDensity::sample: unknown kind");
}

double FeatureDensity::u_marginal_pdf(double u) const {
  switch (kind_) {
    case Kind::IsotropicGaussian: {
      double s = param_;
      return std::exp(-0.5 * u * u / (s * s)) / (s * 2.5066282746310005024);
    }
    case Kind::UniformBall: {
      double R = param_;
      if (std::abs(u) >= R) return 0.0;
      int n = dimension_;
      // f(u) = (1 - (u/R)^2)^((n-1)/2) / (R * B(1/2, (n+1)/2))
      double log_b = std::lgamma(0.5) + std::lgamma(0.5 * (n + 1)) -
                     std::lgamma(0.5 * n + 1.0);
      return std::pow(1.0 - (u / R) * (u / R), 0.5 * (n - 1)) /
             (R * std::exp(log_b));
    }
    case Kind::UniformUInterval:
      return std::abs(u) <= param_ ? 0.5 / param_ : 0.0;
  }
  return 0.0;
}

double FeatureDensity::u_support() const {
  switch (kind_) {
    case Kind::IsotropicGaussian:
      return std::numeric_limits<double>::infinity();
    case Kind::UniformBall:
    case Kind::UniformUInterval:
      return param_;
  }
  return 0.0;
}

Vec FeatureDensity::sample_transverse(double u, const Vec& axis,
                                      CounterRng& rng) const {
  int n = dimension_;
  switch (kind_) {
    case Kind::IsotropicGaussian: {
      Vec g = gaussian_vector(n, param_, rng);
      axpy(g, -dot(g, axis), axis);
      return g;
    }
    case Kind::UniformBall: {
      double R = param_;
      double res2 = R * R - u * u;
      if (res2 <= 0.0) return Vec(n, 0.0);
      int m = n - 1;
      double radius = std::sqrt(res2) * std::pow(rng.uniform(), 1.0 / m);
      return scaled(complement_direction(axis, rng), radius);
    }
    case Kind::UniformUInterval:
      return Vec(n, 0.0);
  }
  return Vec(n, 0.0);
}

FeatureMoments FeatureDensity::moments() const {
  FeatureMoments m;
  int n = dimension_;
  switch (kind_) {
    case Kind::IsotropicGaussian: {
      double s2 = param_ * param_;
      m.r2 = n * s2;
      m.r2_cos2 = s2;
      m.r4_cos2 = (n + 2) * s2 * s2;
      return m;
    }
    case Kind::UniformBall: {
      double R = param_;
      // Radial density ~ r^(n-1); angular factor E[cos^2] from the polar
      // angle density ~ sin^(n-2)(theta).
      double z = integrate([&](double r) { return std::pow(r, n - 1); }, 0.0, R);
      double r2 = integrate([&](double r) { return r * r * std::pow(r, n - 1); },
                            0.0, R) / z;
      double r4 = integrate(
                      [&](double r) { return r * r * r * r * std::pow(r, n - 1); },
                      0.0, R) / z;
      double cos2;
      if (n == 2) {
        cos2 = 0.5;
      } else {
        double za = integrate(
            [&](double t) { return std::pow(std::sin(t), n - 2); }, 0.0,
            3.141592653589793);
        cos2 = integrate(
                   [&](double t) {
                     double c = std::cos(t);
                     return c * c * std::pow(std::sin(t), n - 2);
                   },
                   0.0, 3.141592653589793) / za;
      }
      m.r2 = r2;
      m.r2_cos2 = r2 * cos2;
      m.r4_cos2 = r4 * cos2;
      return m;
    }
    case Kind::UniformUInterval: {
      double c = param_;
      m.r2 = c * c / 3.0;          // r = |u|, transverse mass at 0
      m.r2_cos2 = c * c / 3.0;
      m.r4_cos2 = c * c * c * c / 5.0;
      return m;
    }
  }
  throw not_implemented_error("FeatureDensity::moments: unknown kind");
}

LabelErrorDensity LabelErrorDensity::two_point(double psi) {
  if (psi < 0.0) throw contract_error("two_point: psi must be nonnegative");
  return LabelErrorDensity(Kind::TwoPoint, psi);
}

LabelErrorDensity LabelErrorDensity::symmetric_gaussian(double tau) {
  if (tau <= 0.0) throw contract_error("symmetric_gaussian: tau must be positive");
  return LabelErrorDensity(Kind::SymmetricGaussian, tau);
}

double LabelErrorDensity::pdf(double abs_error) const {
  if (kind_ == Kind::TwoPoint)
    throw not_implemented_error("two-point label error has no density");
  double t = param_;
  return std::exp(-0.5 * abs_error * abs_error / (t * t)) /
         (t * 2.5066282746310005024);
}

double LabelErrorDensity::sample(CounterRng& rng) const {
  if (kind_ == Kind::TwoPoint) return rng.sign() * param_;
  return param_ * rng.gaussian();
}

}  // namespace sclab
