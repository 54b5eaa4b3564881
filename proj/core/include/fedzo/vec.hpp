#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace fedzo {

/// Flat real-valued vector. Positions, gradient estimates and error-feedback
/// memories are all NumVecs of dimension d or N*d.
using NumVec = std::vector<double>;

namespace vec {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm_sq(std::span<const double> a) { return dot(a, a); }

inline double norm(std::span<const double> a) { return std::sqrt(norm_sq(a)); }

inline double dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return std::sqrt(s);
}

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(std::span<double> x, double alpha) {
  for (double& v : x) v *= alpha;
}

inline NumVec scaled(std::span<const double> x, double alpha) {
  NumVec out(x.begin(), x.end());
  scale(out, alpha);
  return out;
}

inline NumVec sum(std::span<const double> a, std::span<const double> b) {
  NumVec out(a.begin(), a.end());
  axpy(1.0, b, out);
  return out;
}

inline NumVec diff(std::span<const double> a, std::span<const double> b) {
  NumVec out(a.begin(), a.end());
  axpy(-1.0, b, out);
  return out;
}

inline bool all_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

inline int nonzero_count(std::span<const double> x) {
  int n = 0;
  for (double v : x) {
    if (v != 0.0) ++n;
  }
  return n;
}

/// View of block i in a concatenated N*d vector.
inline std::span<const double> block(std::span<const double> x, int i, int dim) {
  return x.subspan(static_cast<std::size_t>(i) * dim, dim);
}

inline std::span<double> mut_block(std::span<double> x, int i, int dim) {
  return x.subspan(static_cast<std::size_t>(i) * dim, dim);
}

}  // namespace vec
}  // namespace fedzo
