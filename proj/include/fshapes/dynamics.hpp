#pragma once

// Hamiltonian geodesic flow of discrete fshape metamorphosis and the adjoint
// (backward) pass that yields the gradient of the shooting objective.
//
// State z = (x, f, p, pf). The reduced Hamiltonian is
//   H_r = 1/(2 gamma_V) p^T K_x p + 1/(2 gamma_f) pf^T D_s(x)^{-1} pf,
// and the flow is z' = F(z) = J grad H_r with J = [[0, I], [-I, 0]].

#include "fshapes/fem_norms.hpp"
#include "fshapes/fshape.hpp"
#include "fshapes/kernels.hpp"
#include "fshapes/varifold.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace fshapes {

/// Four-block phase-space vector. The tag keeps states and adjoints apart.
template <class Tag>
struct PhaseVector {
  Matrix x;   // P x n
  Vector f;   // P
  Matrix p;   // P x n
  Vector pf;  // P

  static PhaseVector zeros(Index P, Index n) {
    return {Matrix::Zero(P, n), Vector::Zero(P), Matrix::Zero(P, n), Vector::Zero(P)};
  }

  PhaseVector& operator+=(const PhaseVector& o) {
    x += o.x;
    f += o.f;
    p += o.p;
    pf += o.pf;
    return *this;
  }
  PhaseVector& operator*=(double s) {
    x *= s;
    f *= s;
    p *= s;
    pf *= s;
    return *this;
  }
  friend PhaseVector operator+(PhaseVector a, const PhaseVector& b) { return a += b; }
  friend PhaseVector operator-(PhaseVector a, const PhaseVector& b) { return a += b * -1.0; }
  friend PhaseVector operator*(PhaseVector a, double s) { return a *= s; }
  friend PhaseVector operator*(double s, PhaseVector a) { return a *= s; }

  double max_abs() const {
    double m = 0.0;
    if (x.size()) m = std::max(m, x.cwiseAbs().maxCoeff());
    if (f.size()) m = std::max(m, f.cwiseAbs().maxCoeff());
    if (p.size()) m = std::max(m, p.cwiseAbs().maxCoeff());
    if (pf.size()) m = std::max(m, pf.cwiseAbs().maxCoeff());
    return m;
  }
  bool all_finite() const { return x.allFinite() && f.allFinite() && p.allFinite() && pf.allFinite(); }
};

struct StateTag;
struct AdjointTag;
/// (x, f, p, pf): positions, signals, geometric and functional momenta.
using ShootingState = PhaseVector<StateTag>;
/// (X, F, P, Pf): co-variables of the linearized flow.
using AdjointState = PhaseVector<AdjointTag>;

/// How the backward pass reconstructs states between stored samples.
enum class StageInterpolation { kLinear, kHermite };

struct DynamicsConfig {
  double gamma_V = 1.0;
  double gamma_f = 1.0;
  RadialKernelSpec kernel = RadialKernelSpec::gaussian(0.3);
  FunctionalMetric metric{};
  int n_steps = 20;
  double fd_epsilon = std::cbrt(std::numeric_limits<double>::epsilon());
  // CG target for the D_s solves inside the flow. Tighter than the generic
  // 1e-10 so that the finite-difference probes of the adjoint see a smooth F.
  double solver_tol = 1e-13;
  StageInterpolation interpolation = StageInterpolation::kHermite;

  void validate() const {
    if (!(gamma_V > 0.0) || !(gamma_f > 0.0)) throw InvalidInput("gamma_V and gamma_f must be positive");
    if (n_steps < 2) throw InvalidInput("n_steps must be at least 2");
    if (!(fd_epsilon > 0.0)) throw InvalidInput("fd_epsilon must be positive");
    if (!(solver_tol > 0.0)) throw InvalidInput("solver_tol must be positive");
    kernel.validate();
    metric.validate();
  }
};

/// Samples of a geodesic at t_k = k / n_steps.
struct Trajectory {
  std::vector<ShootingState> states;
  std::vector<ShootingState> rates;  // F(states[k]); filled by integrate_forward

  int n_steps() const { return static_cast<int>(states.size()) - 1; }
  const ShootingState& front() const { return states.front(); }
  const ShootingState& back() const { return states.back(); }
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, int step) : Error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

namespace detail {

inline void require_state_shape(const ShootingState& s, const Cells& cells) {
  const Index P = s.x.rows();
  if (s.f.size() != P || s.p.rows() != P || s.p.cols() != s.x.cols() || s.pf.size() != P) {
    throw InvalidInput("shooting state blocks have inconsistent shapes");
  }
  if (cells.size() > 0 && cells.maxCoeff() >= P) throw InvalidInput("cells reference vertices outside the state");
}

}  // namespace detail

inline double reduced_hamiltonian(const ShootingState& s, const Cells& cells, const DynamicsConfig& cfg) {
  detail::require_state_shape(s, cells);
  const double geometric = quad_form(cfg.kernel, s.x, s.p) / (2.0 * cfg.gamma_V);
  if (s.pf.squaredNorm() == 0.0) return geometric;
  const auto D = assemble_metric(cfg.metric, s.x, cells);
  const Vector h = solve_Ds(D, s.pf, cfg.solver_tol);
  return geometric + s.pf.dot(h) / (2.0 * cfg.gamma_f);
}

inline double reduced_hamiltonian(const ShootingState& s, const Fshape& templ, const DynamicsConfig& cfg) {
  return reduced_hamiltonian(s, templ.cells, cfg);
}

/// F(z): time derivative of (x, f, p, pf) along the reduced Hamiltonian flow.
inline ShootingState forward_rhs(const ShootingState& s, const Cells& cells, const DynamicsConfig& cfg) {
  detail::require_state_shape(s, cells);
  ShootingState out;
  kernel_self_terms(cfg.kernel, s.x, s.p, out.x, out.p);
  out.x /= cfg.gamma_V;
  out.p *= -0.5 / cfg.gamma_V;
  out.pf = Vector::Zero(s.pf.size());
  if (s.pf.squaredNorm() == 0.0) {
    out.f = Vector::Zero(s.f.size());
    return out;
  }
  const auto D = assemble_metric(cfg.metric, s.x, cells);
  const Vector h = solve_Ds(D, s.pf, cfg.solver_tol);
  out.f = h / cfg.gamma_f;
  out.p += dx_quadratic_form(s.x, cells, cfg.metric, h) * (0.5 / cfg.gamma_f);
  return out;
}

/// One classical RK4 step of size `dt` for y' = rhs(t, y).
template <class Y, class Rhs>
Y rk4_step(const Y& y, double t, double dt, Rhs&& rhs, Y* first_stage = nullptr) {
  const Y k1 = rhs(t, y);
  const Y k2 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k1);
  const Y k3 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k2);
  const Y k4 = rhs(t + dt, y + dt * k3);
  if (first_stage) *first_stage = k1;
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Fixed-step RK4 over [0, 1]. pf is copied from s0 into every sample.
inline Trajectory integrate_forward(const ShootingState& s0, const Cells& cells, const DynamicsConfig& cfg) {
  cfg.validate();
  detail::require_state_shape(s0, cells);
  const int N = cfg.n_steps;
  const double dt = 1.0 / N;
  Trajectory traj;
  traj.states.reserve(N + 1);
  traj.rates.reserve(N + 1);
  traj.states.push_back(s0);
  auto rhs = [&](double, const ShootingState& z) { return forward_rhs(z, cells, cfg); };
  for (int k = 0; k < N; ++k) {
    ShootingState k1;
    ShootingState next;
    try {
      next = rk4_step(traj.states.back(), k * dt, dt, rhs, &k1);
    } catch (const DegenerateCellError& e) {
      throw IntegrationError("forward integration step " + std::to_string(k) + ": " + e.what(), k);
    }
    next.pf = s0.pf;
    if (!next.all_finite()) {
      throw IntegrationError("forward integration produced non-finite values at step " + std::to_string(k), k);
    }
    traj.rates.push_back(std::move(k1));
    traj.states.push_back(std::move(next));
  }
  traj.rates.push_back(rhs(1.0, traj.states.back()));
  return traj;
}

inline Trajectory integrate_forward(const ShootingState& s0, const Fshape& templ, const DynamicsConfig& cfg) {
  return integrate_forward(s0, templ.cells, cfg);
}

/// -dF(z)^T w, computed from one central-difference directional derivative.
/// For a Hamiltonian field F = J grad H one has dF^T w = J dF (J w).
inline AdjointState adjoint_rhs(const ShootingState& z, const AdjointState& w, const Cells& cells,
                                const DynamicsConfig& cfg) {
  ShootingState dir{w.p, w.pf, -w.x, -w.f};
  const double dir_scale = dir.max_abs();
  if (dir_scale == 0.0) return AdjointState::zeros(w.x.rows(), w.x.cols());
  const double eps = cfg.fd_epsilon * (1.0 + z.max_abs()) / dir_scale;
  const ShootingState Fp = forward_rhs(z + eps * dir, cells, cfg);
  const ShootingState Fm = forward_rhs(z - eps * dir, cells, cfg);
  const ShootingState D = (Fp - Fm) * (1.0 / (2.0 * eps));
  // dF^T w = (D.p, D.pf, -D.x, -D.f); return its negative.
  return AdjointState{-D.p, -D.pf, D.x, D.f};
}

namespace detail {

inline ShootingState stage_state(const Trajectory& traj, int k, const DynamicsConfig& cfg) {
  // State at t_k + dt/2 between samples k and k+1.
  const ShootingState& a = traj.states[k];
  const ShootingState& b = traj.states[k + 1];
  ShootingState mid = 0.5 * (a + b);
  if (cfg.interpolation == StageInterpolation::kHermite && traj.rates.size() == traj.states.size()) {
    const double dt = 1.0 / traj.n_steps();
    mid += (dt / 8.0) * (traj.rates[k] - traj.rates[k + 1]);
  }
  mid.pf = a.pf;
  return mid;
}

}  // namespace detail

/// Integrates the adjoint system backward from t = 1 to t = 0 along `traj`.
/// `end` holds (X_1, F_1, P_1, Pf_1); returns the adjoint at t = 0.
inline AdjointState integrate_adjoint_backward(const Trajectory& traj, const AdjointState& end, const Cells& cells,
                                               const DynamicsConfig& cfg) {
  cfg.validate();
  const int N = traj.n_steps();
  if (N < 1) throw InvalidInput("trajectory has no steps");
  const double dt = 1.0 / N;
  AdjointState y = end;
  for (int k = N - 1; k >= 0; --k) {
    const ShootingState& z1 = traj.states[k + 1];
    const ShootingState& z0 = traj.states[k];
    const ShootingState zm = detail::stage_state(traj, k, cfg);
    const AdjointState k1 = adjoint_rhs(z1, y, cells, cfg);
    const AdjointState k2 = adjoint_rhs(zm, y - (0.5 * dt) * k1, cells, cfg);
    const AdjointState k3 = adjoint_rhs(zm, y - (0.5 * dt) * k2, cells, cfg);
    const AdjointState k4 = adjoint_rhs(z0, y - dt * k3, cells, cfg);
    y = y - (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y.all_finite()) {
      throw IntegrationError("adjoint integration produced non-finite values at step " + std::to_string(k), k);
    }
  }
  return y;
}

/// Data of one registration problem: template fshape, fidelity to the target,
/// dynamics and the fidelity weight gamma_W.
struct ShootingProblem {
  Fshape source;
  FidelityTerm fidelity;
  DynamicsConfig dynamics;
  double gamma_W = 1.0;
};

struct ObjectiveValue {
  double total = 0.0;
  double energy = 0.0;
  double fidelity = 0.0;
};

/// Objective value together with the geodesic that produced it.
struct Evaluation {
  ObjectiveValue value;
  Trajectory trajectory;
};

inline ShootingState initial_state(const Fshape& source, const Matrix& p0, const Vector& pf) {
  if (p0.rows() != source.vertices.rows() || p0.cols() != source.vertices.cols() ||
      pf.size() != source.vertices.rows()) {
    throw InvalidInput("momenta shapes do not match the source fshape");
  }
  return ShootingState{source.vertices, source.signals, p0, pf};
}

inline Evaluation evaluate(const Matrix& p0, const Vector& pf, const ShootingProblem& problem) {
  const ShootingState s0 = initial_state(problem.source, p0, pf);
  Evaluation ev;
  // The energy is conserved along the geodesic, so it is read at t = 0.
  ev.value.energy = reduced_hamiltonian(s0, problem.source.cells, problem.dynamics);
  ev.trajectory = integrate_forward(s0, problem.source.cells, problem.dynamics);
  const ShootingState& z1 = ev.trajectory.back();
  ev.value.fidelity = problem.fidelity.value(z1.x, z1.f, problem.source.cells);
  ev.value.total = ev.value.energy + problem.gamma_W * ev.value.fidelity;
  return ev;
}

struct ObjectiveGradient {
  Matrix p0;                // d J / d p0
  Vector pf;                // D_0(x_0) (d J / d pf): the descent direction used for pf
  Vector pf_euclidean;      // d J / d pf
  ObjectiveValue value;
};

/// Gradient of J from an already computed forward evaluation.
inline ObjectiveGradient gradient_from_evaluation(const Matrix& p0, const Vector& pf, const Evaluation& ev,
                                                  const ShootingProblem& problem) {
  const Cells& cells = problem.source.cells;
  const DynamicsConfig& cfg = problem.dynamics;
  const ShootingState& z1 = ev.trajectory.back();
  const FidelityGradient g1 = problem.fidelity.gradient(z1.x, z1.f, cells);
  const Index P = p0.rows(), n = p0.cols();
  AdjointState end{problem.gamma_W * g1.dx, problem.gamma_W * g1.df, Matrix::Zero(P, n), Vector::Zero(P)};
  const AdjointState start = integrate_adjoint_backward(ev.trajectory, end, cells, cfg);

  const Matrix& x0 = problem.source.vertices;
  ObjectiveGradient out;
  out.value = ev.value;
  out.p0 = kernel_conv(cfg.kernel, x0, x0, p0) / cfg.gamma_V + start.p;
  Vector h0 = Vector::Zero(P);
  if (pf.squaredNorm() > 0.0) h0 = solve_Ds(assemble_metric(cfg.metric, x0, cells), pf, cfg.solver_tol);
  out.pf_euclidean = h0 / cfg.gamma_f + start.pf;
  out.pf = assemble_D0_lumped(x0, cells) * out.pf_euclidean;
  return out;
}

/// Forward shoot, fidelity gradient at t = 1, backward adjoint, then the
/// two gradient blocks at t = 0.
inline ObjectiveGradient gradient_of_objective(const Matrix& p0, const Vector& pf, const ShootingProblem& problem) {
  const Evaluation ev = evaluate(p0, pf, problem);
  return gradient_from_evaluation(p0, pf, ev, problem);
}

}  // namespace fshapes
