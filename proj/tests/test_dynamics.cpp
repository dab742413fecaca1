#include "support.hpp"

#include <gtest/gtest.h>

using namespace fshapes;
using namespace fshapes::testing;

namespace {

// Independent landmark geodesic integrator (pure deformation, Gaussian kernel
// exp(-|x - y|^2 / (2 s^2))), written directly from the landmark Hamiltonian
// H = 1/(2 gV) sum_ij k_ij <p_i, p_j>.
struct Landmarks {
  Matrix x, p;
};

Landmarks landmark_rhs(const Landmarks& s, double sigma, double gV) {
  const Index P = s.x.rows();
  Landmarks d{Matrix::Zero(P, s.x.cols()), Matrix::Zero(P, s.x.cols())};
  for (Index i = 0; i < P; ++i) {
    for (Index j = 0; j < P; ++j) {
      const Eigen::RowVectorXd r = s.x.row(i) - s.x.row(j);
      const double k = std::exp(-r.squaredNorm() / (2 * sigma * sigma));
      d.x.row(i) += k * s.p.row(j) / gV;
      // d/dx_i of k_ij = -k_ij (x_i - x_j) / s^2, counted twice (ij and ji terms).
      d.p.row(i) += (k * s.p.row(i).dot(s.p.row(j)) / (sigma * sigma * gV)) * r;
    }
  }
  return d;
}

std::vector<Landmarks> landmark_geodesic(Landmarks s, double sigma, double gV, int N) {
  std::vector<Landmarks> path{s};
  const double dt = 1.0 / N;
  auto axpy = [](const Landmarks& a, double h, const Landmarks& b) { return Landmarks{a.x + h * b.x, a.p + h * b.p}; };
  for (int k = 0; k < N; ++k) {
    const Landmarks k1 = landmark_rhs(s, sigma, gV);
    const Landmarks k2 = landmark_rhs(axpy(s, dt / 2, k1), sigma, gV);
    const Landmarks k3 = landmark_rhs(axpy(s, dt / 2, k2), sigma, gV);
    const Landmarks k4 = landmark_rhs(axpy(s, dt, k3), sigma, gV);
    s.x += dt / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
    s.p += dt / 6 * (k1.p + 2 * k2.p + 2 * k3.p + k4.p);
    path.push_back(s);
  }
  return path;
}

DynamicsConfig config(int order = 0) {
  DynamicsConfig cfg;
  cfg.gamma_V = 1.3;
  cfg.gamma_f = 0.7;
  cfg.kernel = RadialKernelSpec::gaussian(0.4);
  cfg.metric = order == 1 ? FunctionalMetric{1, MassScheme::kP1} : FunctionalMetric{0, MassScheme::kLumped};
  return cfg;
}

double relative_drift(const Trajectory& tr, const Cells& cells, const DynamicsConfig& cfg) {
  const double h0 = reduced_hamiltonian(tr.front(), cells, cfg);
  double worst = 0.0;
  for (const auto& s : tr.states) worst = std::max(worst, std::abs(reduced_hamiltonian(s, cells, cfg) - h0));
  return worst / std::max(1.0, std::abs(h0));
}

}  // namespace

TEST(ReducedHamiltonian, Examples) {
  const Fshape fs = random_surface(4, 3);
  const DynamicsConfig cfg = config();
  const Index P = fs.num_vertices();
  EXPECT_EQ(reduced_hamiltonian(ShootingState::zeros(P, 3) + ShootingState{fs.vertices, fs.signals, Matrix::Zero(P, 3),
                                                                          Vector::Zero(P)},
                                fs.cells, cfg),
            0.0);
  const Matrix p = random_matrix(P, 3);
  ShootingState s{fs.vertices, fs.signals, p, Vector::Zero(P)};
  EXPECT_NEAR(reduced_hamiltonian(s, fs.cells, cfg), quad_form(cfg.kernel, fs.vertices, p) / (2 * cfg.gamma_V), 1e-14);

  s.pf = random_vector(P);
  DynamicsConfig doubled = cfg;
  doubled.gamma_f *= 2;
  const double geo = quad_form(cfg.kernel, fs.vertices, p) / (2 * cfg.gamma_V);
  EXPECT_NEAR(reduced_hamiltonian(s, fs.cells, doubled) - geo, 0.5 * (reduced_hamiltonian(s, fs.cells, cfg) - geo),
              1e-12);
}

TEST(ForwardRhs, ZeroMomentaGiveZeroRates) {
  const Fshape fs = random_surface(4, 3);
  const Index P = fs.num_vertices();
  const ShootingState d = forward_rhs({fs.vertices, fs.signals, Matrix::Zero(P, 3), Vector::Zero(P)}, fs.cells, config());
  EXPECT_EQ(d.max_abs(), 0.0);
}

TEST(ForwardRhs, PureGeometryMatchesLandmarkOracle) {
  Matrix x(3, 3);
  x << 0, 0, 0, 0.3, 0.1, 0, 0.1, 0.4, 0.2;
  Fshape fs{x, Vector::Constant(3, 0.5), Cells(1, 3)};
  fs.cells << 0, 1, 2;
  const Matrix p = random_matrix(3, 3);
  const DynamicsConfig cfg = config();
  const ShootingState d = forward_rhs({x, fs.signals, p, Vector::Zero(3)}, fs.cells, cfg);
  const Landmarks ref = landmark_rhs({x, p}, 0.4, cfg.gamma_V);
  EXPECT_LT((d.x - ref.x).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((d.p - ref.p).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(d.f.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ForwardRhs, IsTheHamiltonianVectorField) {
  for (int order : {0, 1}) {
    for (const Fshape& fs : {random_surface(4, 3), random_curve(7, 2)}) {
      const DynamicsConfig cfg = config(order);
      const Index P = fs.num_vertices(), n = fs.ambient_dim();
      const ShootingState s{fs.vertices, fs.signals, random_matrix(P, n, 0.3), random_vector(P, 0.3)};
      const ShootingState F = forward_rhs(s, fs.cells, cfg);
      const double h = 1e-6;
      auto H = [&](const ShootingState& z) { return reduced_hamiltonian(z, fs.cells, cfg); };
      const Matrix dx = random_matrix(P, n), dp = random_matrix(P, n);
      const Vector dpf = random_vector(P);
      ShootingState zx = s, zp = s, zf = s;
      // p' = -dH/dx (includes the +1/(2 gamma_f) d_x(h^T D_s h) term)
      auto shift = [&](ShootingState z, double t, int block) {
        if (block == 0) z.x += t * dx;
        if (block == 1) z.p += t * dp;
        if (block == 2) z.pf += t * dpf;
        return z;
      };
      const double dHdx = (H(shift(s, h, 0)) - H(shift(s, -h, 0))) / (2 * h);
      const double dHdp = (H(shift(s, h, 1)) - H(shift(s, -h, 1))) / (2 * h);
      const double dHdpf = (H(shift(s, h, 2)) - H(shift(s, -h, 2))) / (2 * h);
      EXPECT_LT(rel_err(-(F.p.array() * dx.array()).sum(), dHdx), 1e-6);
      EXPECT_LT(rel_err((F.x.array() * dp.array()).sum(), dHdp), 1e-6);
      EXPECT_LT(rel_err(F.f.dot(dpf), dHdpf), 1e-6);
      EXPECT_EQ(F.pf.cwiseAbs().maxCoeff(), 0.0);
    }
  }
}

TEST(IntegrateForward, ZeroMomentaIsConstant) {
  const Fshape fs = random_surface(4, 3);
  const Index P = fs.num_vertices();
  const Trajectory tr = integrate_forward({fs.vertices, fs.signals, Matrix::Zero(P, 3), Vector::Zero(P)}, fs.cells,
                                          config());
  ASSERT_EQ(tr.states.size(), 21u);
  for (const auto& s : tr.states) {
    EXPECT_EQ(s.x, fs.vertices);
    EXPECT_EQ(s.f, fs.signals);
  }
}

TEST(IntegrateForward, PfIsBitwiseConstant) {
  const Fshape fs = random_surface(5, 4);
  const auto [p0, pf] = density_momenta(fs, 1.0);
  for (int order : {0, 1}) {
    const Trajectory tr = integrate_forward({fs.vertices, fs.signals, p0, pf}, fs.cells, config(order));
    for (const auto& s : tr.states) EXPECT_EQ(s.pf, pf);
  }
}

TEST(IntegrateForward, HamiltonianConservedWithRk4Order) {
  const Fshape fs = random_surface(6, 5);
  const auto [p0, pf] = density_momenta(fs, 1.0);
  for (int order : {0, 1}) {
    DynamicsConfig cfg = config(order);
    const ShootingState s0{fs.vertices, fs.signals, p0, pf};
    const double d20 = relative_drift(integrate_forward(s0, fs.cells, cfg), fs.cells, cfg);
    cfg.n_steps = 40;
    const double d40 = relative_drift(integrate_forward(s0, fs.cells, cfg), fs.cells, cfg);
    EXPECT_LT(d20, 1e-6);
    EXPECT_GE(d20 / d40, 8.0);
  }
}

TEST(IntegrateForward, PureGeometryMatchesLandmarkGeodesic) {
  const Matrix x = random_matrix(5, 3, 0.2);
  const Matrix p = random_matrix(5, 3, 0.5);
  Cells cells(3, 3);
  cells << 0, 1, 2, 1, 3, 2, 2, 3, 4;
  const DynamicsConfig cfg = config();
  const Trajectory tr = integrate_forward({x, Vector::Constant(5, 1.0), p, Vector::Zero(5)}, cells, cfg);
  const auto ref = landmark_geodesic({x, p}, 0.4, cfg.gamma_V, cfg.n_steps);
  for (int k = 0; k <= cfg.n_steps; ++k) {
    EXPECT_LT((tr.states[k].x - ref[k].x).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((tr.states[k].p - ref[k].p).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(tr.states[k].f, Vector::Constant(5, 1.0));
  }
}

TEST(IntegrateForward, TimeReversal) {
  const Fshape fs = random_surface(4, 4);
  const auto [p0, pf] = density_momenta(fs, 1.0);
  DynamicsConfig cfg = config();
  cfg.n_steps = 40;
  const Trajectory fwd = integrate_forward({fs.vertices, fs.signals, p0, pf}, fs.cells, cfg);
  const ShootingState& e = fwd.back();
  const Trajectory back = integrate_forward({e.x, e.f, -e.p, -e.pf}, fs.cells, cfg);
  EXPECT_LT((back.back().x - fs.vertices).norm() / fs.vertices.norm(), 1e-6);
  EXPECT_LT((back.back().f - fs.signals).norm() / fs.signals.norm(), 1e-6);
}

TEST(IntegrateForward, OverflowRaisesIntegrationError) {
  Matrix x(3, 3);
  x << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  Cells cells(1, 3);
  cells << 0, 1, 2;
  Matrix p(3, 3);
  p << 1e200, 0, 0, 1e200, 0, 0, 1e200, 0, 0;
  EXPECT_THROW(integrate_forward({x, Vector::Zero(3), p, Vector::Zero(3)}, cells, config()), IntegrationError);
}

TEST(Adjoint, ZeroEndGivesZero) {
  const Fshape fs = random_surface(3, 3);
  const auto [p0, pf] = density_momenta(fs, 1.0);
  const DynamicsConfig cfg = config();
  const Trajectory tr = integrate_forward({fs.vertices, fs.signals, p0, pf}, fs.cells, cfg);
  const AdjointState a = integrate_adjoint_backward(tr, AdjointState::zeros(9, 3), fs.cells, cfg);
  EXPECT_EQ(a.max_abs(), 0.0);
}

TEST(Adjoint, SignalBlocksStayZeroWithoutFunctionalCoupling) {
  const Fshape fs = random_surface(3, 3);
  const auto [p0, pf] = density_momenta(fs, 1.0);
  const DynamicsConfig cfg = config();
  const Trajectory tr = integrate_forward({fs.vertices, fs.signals, p0, Vector::Zero(9)}, fs.cells, cfg);
  AdjointState end = AdjointState::zeros(9, 3);
  end.x = random_matrix(9, 3);
  const AdjointState a = integrate_adjoint_backward(tr, end, fs.cells, cfg);
  EXPECT_EQ(a.f.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(a.pf.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(a.p.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Adjoint, LinearizedEndpointMatchesFiniteDifferences) {
  // <W(1), dz(1)> = <W(0), dz(0)> for the linearized flow.
  const Fshape fs = random_surface(3, 3);
  const auto [p0, pf] = density_momenta(fs, 1.0);
  const DynamicsConfig cfg = config(1);
  const ShootingState s0{fs.vertices, fs.signals, p0, pf};
  const Trajectory tr = integrate_forward(s0, fs.cells, cfg);
  AdjointState end{random_matrix(9, 3), random_vector(9), random_matrix(9, 3), random_vector(9)};
  const AdjointState w0 = integrate_adjoint_backward(tr, end, fs.cells, cfg);
  ShootingState dz{random_matrix(9, 3, 0.1), random_vector(9, 0.1), random_matrix(9, 3, 0.01), random_vector(9, 0.01)};
  const double h = 1e-5;
  const ShootingState zp = integrate_forward(s0 + h * dz, fs.cells, cfg).back();
  const ShootingState zm = integrate_forward(s0 - h * dz, fs.cells, cfg).back();
  const ShootingState dz1 = (zp - zm) * (1.0 / (2 * h));
  auto pair = [](const AdjointState& w, const ShootingState& v) {
    return (w.x.array() * v.x.array()).sum() + w.f.dot(v.f) + (w.p.array() * v.p.array()).sum() + w.pf.dot(v.pf);
  };
  EXPECT_LT(rel_err(pair(end, dz1), pair(w0, dz)), 1e-5);
}

TEST(DynamicsConfig, Validation) {
  DynamicsConfig cfg;
  cfg.gamma_V = 0;
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg = DynamicsConfig{};
  cfg.n_steps = 1;
  EXPECT_THROW(cfg.validate(), InvalidInput);
}
