#pragma once

// Geodesics of spheres with constant signal under the L2 metamorphosis
// metric and a Gaussian deformation kernel. The flow reduces to three scalar
// ODEs in (f, r, rho) with pf constant:
//   f'   = pf / (gamma_f r^2)
//   r'   = chi(r) rho / gamma_V
//   rho' = -chi'(r) rho^2 / (2 gamma_V) + pf^2 / (gamma_f r^3)
// chi carries a 4 pi prefactor. Integrating a zonal function over the unit
// sphere gives 2 pi, so a mesh flowing with deformation weight gamma_V follows
// this system with 2 gamma_V; see SphereParams::for_mesh.

#include "fshapes/fem_norms.hpp"
#include "fshapes/fshape.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace fshapes {

namespace detail {

// g(z) = int_{-1}^{1} u exp(-z (1 - u)) du  and  g'(z), z = r^2 / sigma^2.
// Closed form: 1/z - 1/z^2 + e^{-2z} (1/z + 1/z^2). It cancels badly for small
// z, where the series  g = sum_k (-z)^k / k! (2^{k+1}/(k+1) - 2^{k+2}/(k+2))
// is used instead.
inline void sphere_profile(double z, double& g, double& dg) {
  if (z < 0.5) {
    g = 0.0;
    dg = 0.0;
    double term = 1.0;  // (-z)^k / k!
    double pow2 = 2.0;  // 2^{k+1}
    for (int k = 0; k < 40; ++k) {
      const double c = pow2 / (k + 1) - 2.0 * pow2 / (k + 2);
      g += term * c;
      // d/dz of (-z)^{k+1}/(k+1)! = -(-z)^k / k!
      const double next_c = 2.0 * pow2 / (k + 2) - 4.0 * pow2 / (k + 3);
      dg -= term * next_c;
      term *= -z / (k + 1);
      pow2 *= 2.0;
    }
    return;
  }
  const double e = std::exp(-2.0 * z);
  const double iz = 1.0 / z, iz2 = iz * iz, iz3 = iz2 * iz;
  g = iz - iz2 + e * (iz + iz2);
  dg = -iz2 + 2.0 * iz3 - e * (2.0 * iz + 3.0 * iz2 + 2.0 * iz3);
}

}  // namespace detail

/// chi(r) = 4 pi (s^2/r^2)(1 + e^{-2 r^2/s^2}) [1 - (s^2/r^2) tanh(r^2/s^2)].
inline double chi(double r, double sigma) {
  if (!(r > 0.0)) throw InvalidInput("chi: radius must be positive");
  double g, dg;
  detail::sphere_profile(r * r / (sigma * sigma), g, dg);
  return 4.0 * std::numbers::pi * g;
}

/// d chi / d r.
inline double chi_prime(double r, double sigma) {
  if (!(r > 0.0)) throw InvalidInput("chi_prime: radius must be positive");
  double g, dg;
  detail::sphere_profile(r * r / (sigma * sigma), g, dg);
  return 4.0 * std::numbers::pi * dg * 2.0 * r / (sigma * sigma);
}

struct SphereState {
  double r = 1.0;    // radius
  double f = 0.0;    // constant signal
  double rho = 0.0;  // radial momentum density
  double pf = 0.0;   // functional momentum density, constant in time
};

struct SphereParams {
  double gamma_V = 1.0;
  double gamma_f = 1.0;
  double sigma = 0.3;
  int n_steps = 100;

  /// Oracle parameters that reproduce a mesh geodesic computed with
  /// (gamma_V, gamma_f) and a Gaussian kernel of width sigma.
  static SphereParams for_mesh(double gamma_V, double gamma_f, double sigma, int n_steps) {
    return {2.0 * gamma_V, gamma_f, sigma, n_steps};
  }
};

/// Initial momenta on a sphere mesh of radius r0 centred at the origin: the
/// uniform densities rho (along the outward normal) and pf weighted by lumped
/// vertex areas, measured on the unit sphere.
inline std::pair<Matrix, Vector> sphere_mesh_momenta(const Fshape& sphere, double r0, double rho, double pf) {
  const Vector area = assemble_D0_lumped(sphere).diagonal() / (r0 * r0);
  Matrix p0(sphere.num_vertices(), sphere.ambient_dim());
  for (Index k = 0; k < sphere.num_vertices(); ++k) p0.row(k) = rho * area[k] * sphere.vertices.row(k).normalized();
  return {p0, pf * area};
}

/// Mean vertex distance to the origin and mean signal of a sphere mesh.
inline std::pair<double, double> sphere_mesh_summary(const Matrix& x, const Vector& f) {
  return {x.rowwise().norm().mean(), f.mean()};
}

inline SphereState sphere_rhs(const SphereState& s, const SphereParams& prm) {
  SphereState d;
  d.f = s.pf / (prm.gamma_f * s.r * s.r);
  d.r = chi(s.r, prm.sigma) * s.rho / prm.gamma_V;
  d.rho = -chi_prime(s.r, prm.sigma) * s.rho * s.rho / (2.0 * prm.gamma_V) +
          s.pf * s.pf / (prm.gamma_f * s.r * s.r * s.r);
  d.pf = 0.0;
  return d;
}

/// RK4 path on [0, 1] with n_steps + 1 samples.
inline std::vector<SphereState> integrate_sphere(const SphereState& s0, const SphereParams& prm) {
  if (!(s0.r > 0.0)) throw InvalidInput("integrate_sphere: initial radius must be positive");
  if (!(prm.gamma_V > 0.0) || !(prm.gamma_f > 0.0) || !(prm.sigma > 0.0) || prm.n_steps < 1) {
    throw InvalidInput("integrate_sphere: parameters must be positive");
  }
  auto axpy = [](const SphereState& a, double h, const SphereState& b) {
    return SphereState{a.r + h * b.r, a.f + h * b.f, a.rho + h * b.rho, a.pf};
  };
  const double dt = 1.0 / prm.n_steps;
  std::vector<SphereState> path{s0};
  path.reserve(prm.n_steps + 1);
  for (int k = 0; k < prm.n_steps; ++k) {
    const SphereState& y = path.back();
    try {
      const SphereState k1 = sphere_rhs(y, prm);
      const SphereState k2 = sphere_rhs(axpy(y, 0.5 * dt, k1), prm);
      const SphereState k3 = sphere_rhs(axpy(y, 0.5 * dt, k2), prm);
      const SphereState k4 = sphere_rhs(axpy(y, dt, k3), prm);
      SphereState next{y.r + dt / 6.0 * (k1.r + 2 * k2.r + 2 * k3.r + k4.r),
                       y.f + dt / 6.0 * (k1.f + 2 * k2.f + 2 * k3.f + k4.f),
                       y.rho + dt / 6.0 * (k1.rho + 2 * k2.rho + 2 * k3.rho + k4.rho), y.pf};
      if (!(next.r > 0.0)) throw InvalidInput("radius collapsed");
      path.push_back(next);
    } catch (const InvalidInput&) {
      throw Error("integrate_sphere: radius reached zero during step " + std::to_string(k));
    }
  }
  return path;
}

}  // namespace fshapes
