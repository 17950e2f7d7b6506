#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsfde {

// Values in R^d are plain dense vectors; dimensions stay small (desk scale).
using Vec = std::vector<double>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct QueryBeyondFrontier : Error { using Error::Error; };
struct NonMonotoneTime : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct NonFiniteNorm : Error { using Error::Error; };
struct DegeneratePair : Error { using Error::Error; };
struct FixedPointDivergence : Error { using Error::Error; };
struct StoppedState : Error { using Error::Error; };
struct ResolutionMismatch : Error { using Error::Error; };
struct ContractionTooLarge : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

inline double dot(const Vec& x, const Vec& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

/// Euclidean norm.
inline double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

inline double dist2(const Vec& x, const Vec& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// y += a*x
inline void axpy(double a, const Vec& x, Vec& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

// out = (1-w)*a + w*b
inline void lerp_into(const Vec& a, const Vec& b, double w, Vec& out) {
  out.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + w * (b[i] - a[i]);
}

/// Dense row-major matrix, used for coefficient matrices and diffusion values.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  static Mat identity(std::size_t n) { return scaled_identity(n, 1.0); }

  static Mat scaled_identity(std::size_t n, double s) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = s;
    return m;
  }

  /// Frobenius norm (matches the trace norm |A| = sqrt(trace(A^T A))).
  double frobenius() const {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
  }

  Vec mul(const Vec& x) const {
    Vec y(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j) s += a[i * cols + j] * x[j];
      y[i] = s;
    }
    return y;
  }

  bool zero() const {
    for (double v : a)
      if (v != 0.0) return false;
    return true;
  }
};

inline Mat sub(const Mat& x, const Mat& y) {
  Mat z(x.rows, x.cols);
  for (std::size_t i = 0; i < x.a.size(); ++i) z.a[i] = x.a[i] - y.a[i];
  return z;
}

}  // namespace nsfde
