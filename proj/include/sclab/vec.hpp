#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sclab/errors.hpp"

namespace sclab {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw contract_error("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

inline double norm(const Vec& a) { return std::sqrt(norm2(a)); }

inline Vec sub(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw contract_error("sub: dimension mismatch");
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Vec add(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw contract_error("add: dimension mismatch");
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Vec scaled(const Vec& a, double c) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = c * a[i];
  return r;
}

// a += c * b
inline void axpy(Vec& a, double c, const Vec& b) {
  if (a.size() != b.size()) throw contract_error("axpy: dimension mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += c * b[i];
}

inline bool all_finite(const Vec& a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace sclab
