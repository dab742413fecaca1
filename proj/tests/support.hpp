#pragma once

#include "fshapes/fshapes.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace fshapes::testing {

inline std::mt19937_64& rng() {
  static std::mt19937_64 g(12345);
  return g;
}

inline double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng()); }

inline Matrix random_matrix(Index r, Index c, double sd = 1.0) {
  return Matrix::NullaryExpr(r, c, [&] { return normal(sd); });
}

inline Vector random_vector(Index n, double sd = 1.0) {
  return Vector::NullaryExpr(n, [&] { return normal(sd); });
}

/// Grid on [0,1]^2 with jittered interior, slightly bent out of plane,
/// random signals.
inline Fshape random_surface(int nx, int ny, double jitter = 0.02, double signal_sd = 0.5) {
  Fshape fs = grid_rectangle(nx, ny, 0.0, 1.0, 0.0, 1.0);
  for (Index k = 0; k < fs.num_vertices(); ++k) {
    fs.vertices(k, 0) += normal(jitter);
    fs.vertices(k, 1) += normal(jitter);
    fs.vertices(k, 2) = 0.2 * std::sin(2.0 * fs.vertices(k, 0)) * std::cos(1.5 * fs.vertices(k, 1)) + normal(jitter);
  }
  fs.signals = random_vector(fs.num_vertices(), signal_sd);
  return fs;
}

inline Fshape random_curve(int points, int n = 2, double signal_sd = 0.5) {
  Matrix x(points, n);
  for (int k = 0; k < points; ++k) {
    const double t = static_cast<double>(k) / (points - 1);
    x(k, 0) = t + normal(0.01);
    x(k, 1) = 0.3 * std::sin(3.0 * t) + normal(0.01);
    if (n == 3) x(k, 2) = 0.1 * t * t;
  }
  return polyline(x, random_vector(points, signal_sd));
}

/// Central difference of a scalar function of a matrix along `dir`.
inline double directional_fd(const std::function<double(const Matrix&)>& fn, const Matrix& x, const Matrix& dir,
                             double h) {
  return (fn(x + h * dir) - fn(x - h * dir)) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

/// Area-weighted random momentum densities.
inline std::pair<Matrix, Vector> density_momenta(const Fshape& fs, double amp) {
  const Vector a = assemble_D0_lumped(fs).diagonal();
  Matrix p0 = random_matrix(fs.num_vertices(), fs.ambient_dim(), amp);
  p0 = (p0.array().colwise() * a.array()).matrix();
  return {p0, random_vector(fs.num_vertices(), amp).cwiseProduct(a)};
}

}  // namespace fshapes::testing
