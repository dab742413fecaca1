#include "support.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

using namespace fshapes;
using namespace fshapes::testing;

namespace {

// 4 pi * int_{-1}^{1} u k(2 r^2 (1 - u)) du with k(s) = exp(-s / (2 sigma^2)).
double chi_quadrature(double r, double sigma) {
  auto integrand = [&](double u) { return u * std::exp(-2.0 * r * r * (1.0 - u) / (2.0 * sigma * sigma)); };
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -1.0, 1.0, 15, 1e-14, &err);
  return 4.0 * std::numbers::pi * v;
}

int sign_changes(const std::vector<double>& v) {
  int n = 0;
  for (size_t i = 1; i < v.size(); ++i) n += (v[i] > 0) != (v[i - 1] > 0);
  return n;
}

}  // namespace

TEST(Chi, PositiveAndDecaying) {
  for (double r : {0.1, 0.5, 1.0, 5.0}) EXPECT_GT(chi(r, 0.3), 0.0);
  EXPECT_LT(chi(5.0, 0.3) / chi(1.0, 0.3), 0.05);
  EXPECT_THROW(chi(0.0, 0.3), InvalidInput);
  EXPECT_THROW(chi_prime(-1.0, 0.3), InvalidInput);
}

TEST(Chi, MatchesFunkHeckeQuadrature) {
  for (double r : {0.05, 0.1, 0.2, 0.2121, 0.25, 0.3, 0.5, 1.0, 2.0, 5.0}) {
    EXPECT_LT(rel_err(chi(r, 0.3), chi_quadrature(r, 0.3)), 1e-8) << "r = " << r;
  }
}

TEST(ChiPrime, MatchesFiniteDifferences) {
  // Includes both sides of the series/closed-form switch at r^2 / sigma^2 = 1/2.
  for (double r : {0.3, 1.0, 2.0, 0.15, 0.2, 0.22}) {
    const double h = 1e-6 * r;
    const double fd = (chi(r + h, 0.3) - chi(r - h, 0.3)) / (2 * h);
    EXPECT_LT(rel_err(chi_prime(r, 0.3), fd), 1e-8) << "r = " << r;
  }
  const double rs = 0.3 * std::sqrt(0.5);
  EXPECT_LT(rel_err(chi(rs * (1 - 1e-12), 0.3), chi(rs * (1 + 1e-12), 0.3)), 1e-10);
}

TEST(ChiPrime, InteriorMaximumAndScaling) {
  EXPECT_GT(chi_prime(0.1, 0.3), 0.0);
  EXPECT_LT(chi_prime(1.0, 0.3), 0.0);
  std::vector<double> d;
  for (double r = 0.02; r < 3.0; r += 0.01) d.push_back(chi_prime(r, 0.3));
  EXPECT_EQ(sign_changes(d), 1);
  for (double lambda : {0.5, 2.0, 3.7}) {
    for (double r : {0.2, 0.7, 1.5}) {
      EXPECT_LT(rel_err(chi(lambda * r, lambda * 0.3), chi(r, 0.3)), 1e-13);
      EXPECT_LT(rel_err(chi_prime(lambda * r, lambda * 0.3), chi_prime(r, 0.3) / lambda), 1e-12);
    }
  }
}

TEST(IntegrateSphere, FixedPointAndRecallTerm) {
  SphereParams prm{1.0, 5.0, 0.3, 50};
  const auto still = integrate_sphere({1.0, 0.3, 0.0, 0.0}, prm);
  for (const auto& s : still) {
    EXPECT_EQ(s.r, 1.0);
    EXPECT_EQ(s.f, 0.3);
  }
  const auto pushed = integrate_sphere({1.0, 0.0, 0.0, -0.6}, prm);
  EXPECT_GT(sphere_rhs(pushed[0], prm).rho, 0.0);
  EXPECT_GT(pushed[1].r, pushed[0].r);
  for (const auto& s : pushed) EXPECT_EQ(s.pf, -0.6);
}

TEST(IntegrateSphere, ContractThenExpand) {
  // sigma = 0.3, gamma_V = 1, gamma_f = 5, (rho0, pf) = (-0.25, -0.6); contraction
  // reverses inside [0, 1] when the sphere starts at radius 0.5.
  const SphereParams prm{1.0, 5.0, 0.3, 200};
  const auto path = integrate_sphere({0.5, 0.0, -0.25, -0.6}, prm);
  std::vector<double> rdot;
  for (const auto& s : path) rdot.push_back(sphere_rhs(s, prm).r);
  EXPECT_LT(rdot.front(), 0.0);
  EXPECT_GT(rdot.back(), 0.0);
  EXPECT_EQ(sign_changes(rdot), 1);
  // Signal moves faster while the sphere is small.
  EXPECT_LT(path.back().f, 0.0);

  // From radius 1 the same momenta only contract on [0, 1].
  const auto unit = integrate_sphere({1.0, 0.0, -0.25, -0.6}, prm);
  for (size_t k = 1; k < unit.size(); ++k) EXPECT_LT(unit[k].r, unit[k - 1].r);
}

TEST(IntegrateSphere, SignalQuadratureIdentity) {
  const SphereParams prm{1.0, 5.0, 0.3, 400};
  const SphereState s0{0.5, 0.2, -0.25, -0.6};
  const auto path = integrate_sphere(s0, prm);
  double integral = 0.0;
  for (size_t k = 1; k < path.size(); ++k) {
    integral += 0.5 / prm.n_steps * (1.0 / (path[k].r * path[k].r) + 1.0 / (path[k - 1].r * path[k - 1].r));
  }
  EXPECT_NEAR(path.back().f - s0.f, s0.pf / prm.gamma_f * integral, 1e-6);
}

TEST(IntegrateSphere, FourthOrderSelfConvergence) {
  // Successive endpoint changes under step halving shrink by 2^4.
  for (double r0 : {0.5, 1.0}) {
    const SphereState s0{r0, 0.0, -0.25, -0.6};
    auto end = [&](int n) { return integrate_sphere(s0, {1.0, 5.0, 0.3, n}).back(); };
    for (int n : {40, 80}) {
      const SphereState a = end(n), b = end(2 * n), c = end(4 * n);
      const double ratio_r = (b.r - a.r) / (c.r - b.r), ratio_f = (b.f - a.f) / (c.f - b.f);
      EXPECT_NEAR(ratio_r, 16.0, 4.0) << "r0 = " << r0 << ", n = " << n;
      EXPECT_NEAR(ratio_f, 16.0, 4.0) << "r0 = " << r0 << ", n = " << n;
    }
  }
}

TEST(IntegrateSphere, RejectsInvalidInput) {
  EXPECT_THROW(integrate_sphere({0.0, 0.0, 0.0, 0.0}, {}), InvalidInput);
  EXPECT_THROW(integrate_sphere({1.0, 0.0, 0.0, 0.0}, {-1.0, 1.0, 0.3, 10}), InvalidInput);
  EXPECT_THROW(integrate_sphere({1.0, 0.0, 0.0, 0.0}, {1.0, 1.0, 0.3, 0}), InvalidInput);
  // A violent contraction in two coarse steps overshoots through r = 0.
  EXPECT_THROW(integrate_sphere({1.0, 0.0, -50.0, 0.0}, {1.0, 1.0, 0.3, 2}), Error);
}

TEST(SphereMesh, MomentaAndCoarseCrossCheck) {
  const double r0 = 0.8;
  const Fshape sphere = icosphere(2, r0);
  const auto [p0, pf] = sphere_mesh_momenta(sphere, r0, -0.25, -0.6);
  const Vector area = assemble_D0_lumped(sphere).diagonal();
  EXPECT_NEAR(pf.sum(), -0.6 * area.sum() / (r0 * r0), 1e-12);
  for (Index k = 0; k < sphere.num_vertices(); ++k) {
    const Eigen::Vector3d pk = p0.row(k).transpose(), xk = sphere.vertices.row(k).transpose();
    EXPECT_NEAR(pk.cross(xk).norm(), 0.0, 1e-14);
  }

  DynamicsConfig cfg;
  cfg.gamma_f = 5.0;
  cfg.n_steps = 20;
  const Trajectory tr = shoot(sphere, p0, pf, cfg);
  const auto path = integrate_sphere({r0, 0.0, -0.25, -0.6}, SphereParams::for_mesh(1.0, 5.0, 0.3, 20));
  const auto [r1, f1] = sphere_mesh_summary(tr.back().x, tr.back().f);
  EXPECT_LT(rel_err(r1, path.back().r), 0.02);
  EXPECT_LT(rel_err(f1, path.back().f), 0.02);
}
