#pragma once

// Registration by geodesic shooting: adaptive-step gradient descent on the
// initial momenta (p0, pf) with a coarse-to-fine fidelity kernel schedule.

#include "fshapes/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace fshapes {

struct ScaleStage {
  double scale_p = 1.0;  // multiplies the base sigma_p
  double scale_f = 1.0;  // multiplies the base sigma_f
  int iters = 100;
};

struct MatchConfig {
  double gamma_V = 1.0;
  double gamma_f = 1.0;
  double gamma_W = 1.0;
  RadialKernelSpec deformation_kernel = RadialKernelSpec::gaussian(0.3);
  VarifoldKernels fidelity_kernels{};
  FunctionalMetric metric{};
  int n_steps = 20;
  std::vector<ScaleStage> schedule{{2.0, 2.0, 100}, {1.0, 1.0, 100}};
  double step_init = 1.0;
  double step_shrink = 0.5;
  double step_grow = 1.2;
  double grad_tol = 1e-8;
  double fd_epsilon = std::cbrt(std::numeric_limits<double>::epsilon());

  /// Sum of two Gaussians (widths 0.2 and 0.1) for deformations, and the
  /// final fidelity widths sigma_p = 0.05, sigma_f = 0.7.
  static MatchConfig digits_preset() {
    MatchConfig c;
    c.deformation_kernel = {RadialFamily::kGaussian, {{1.0, 0.2}, {1.0, 0.1}}};
    c.fidelity_kernels = VarifoldKernels::digits_preset();
    return c;
  }

  DynamicsConfig dynamics() const {
    DynamicsConfig d;
    d.gamma_V = gamma_V;
    d.gamma_f = gamma_f;
    d.kernel = deformation_kernel;
    d.metric = metric;
    d.n_steps = n_steps;
    d.fd_epsilon = fd_epsilon;
    return d;
  }

  void validate() const {
    if (!(gamma_W > 0.0)) throw InvalidInput("gamma_W must be positive");
    if (schedule.empty()) throw InvalidInput("the scale schedule must have at least one stage");
    for (const auto& s : schedule) {
      if (!(s.scale_p > 0.0) || !(s.scale_f > 0.0) || s.iters < 0) {
        throw InvalidInput("schedule scales must be positive and iteration counts nonnegative");
      }
    }
    if (!(step_init > 0.0)) throw InvalidInput("step_init must be positive");
    if (!(step_shrink > 0.0 && step_shrink < 1.0)) throw InvalidInput("step_shrink must lie in (0, 1)");
    if (!(step_grow >= 1.0)) throw InvalidInput("step_grow must be at least 1");
    if (!(grad_tol >= 0.0)) throw InvalidInput("grad_tol must be nonnegative");
    fidelity_kernels.validate();
    dynamics().validate();
  }
};

struct HistoryEntry {
  int stage = 0;
  int iteration = 0;
  double objective = 0.0;
  double energy = 0.0;
  double fidelity = 0.0;
  double step = 0.0;
};

struct MatchResult {
  Matrix p0;
  Vector pf;
  Trajectory trajectory;
  std::vector<HistoryEntry> history;
  bool converged = false;
  std::string reason;
};

inline ShootingProblem make_problem(const Fshape& source, const Fshape& target, const MatchConfig& cfg,
                                    const ScaleStage& stage = {}) {
  require_valid(source);
  require_valid(target);
  if (source.cell_dim() != target.cell_dim() || source.ambient_dim() != target.ambient_dim()) {
    throw InvalidInput("source and target must share cell and ambient dimensions");
  }
  ShootingProblem pb;
  pb.source = source;
  pb.fidelity = FidelityTerm(target, cfg.fidelity_kernels.scaled(stage.scale_p, stage.scale_f));
  pb.dynamics = cfg.dynamics();
  pb.gamma_W = cfg.gamma_W;
  return pb;
}

/// J = energy + gamma_W * fidelity for momenta (p0, pf).
inline ObjectiveValue objective(const Matrix& p0, const Vector& pf, const ShootingProblem& problem) {
  return evaluate(p0, pf, problem).value;
}

inline Trajectory shoot(const Fshape& source, const Matrix& p0, const Vector& pf, const DynamicsConfig& cfg) {
  require_valid(source);
  return integrate_forward(initial_state(source, p0, pf), source.cells, cfg);
}

inline Trajectory shoot(const Fshape& source, const Matrix& p0, const Vector& pf, const MatchConfig& cfg) {
  return shoot(source, p0, pf, cfg.dynamics());
}

struct GradientCheckResult {
  std::vector<double> relative_errors;  // one per direction
  double max_relative_error = 0.0;
};

/// Compares the adjoint gradient with central differences of J along
/// `directions` random unit directions in (p0, pf), drawn from a seeded
/// generator.
inline GradientCheckResult gradient_check(const Matrix& p0, const Vector& pf, const ShootingProblem& problem,
                                          int directions = 20, std::uint64_t seed = 1, double h = 1e-5) {
  const ObjectiveGradient g = gradient_of_objective(p0, pf, problem);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  GradientCheckResult out;
  for (int i = 0; i < directions; ++i) {
    Matrix dp = Matrix::NullaryExpr(p0.rows(), p0.cols(), [&] { return normal(rng); });
    Vector df = Vector::NullaryExpr(pf.size(), [&] { return normal(rng); });
    const double norm = std::sqrt(dp.squaredNorm() + df.squaredNorm());
    dp /= norm;
    df /= norm;
    const double fd = (objective(p0 + h * dp, pf + h * df, problem).total -
                       objective(p0 - h * dp, pf - h * df, problem).total) / (2.0 * h);
    const double adjoint = (g.p0.array() * dp.array()).sum() + g.pf_euclidean.dot(df);
    const double scale = std::max(std::abs(fd), std::abs(adjoint));
    const double rel = scale > 0.0 ? std::abs(fd - adjoint) / scale : 0.0;
    out.relative_errors.push_back(rel);
    out.max_relative_error = std::max(out.max_relative_error, rel);
  }
  return out;
}

/// Called after every accepted iteration.
using MatchObserver = std::function<void(const HistoryEntry&)>;

inline MatchResult match(const Fshape& source, const Fshape& target, const MatchConfig& cfg,
                         const MatchObserver& observer = {}) {
  cfg.validate();
  const Index P = source.num_vertices();
  const Index n = source.ambient_dim();
  MatchResult result;
  result.p0 = Matrix::Zero(P, n);
  result.pf = Vector::Zero(P);

  for (size_t stage_idx = 0; stage_idx < cfg.schedule.size(); ++stage_idx) {
    const ScaleStage& stage = cfg.schedule[stage_idx];
    const ShootingProblem problem = make_problem(source, target, cfg, stage);
    Evaluation current = evaluate(result.p0, result.pf, problem);
    if (!std::isfinite(current.value.total)) throw Error("objective is not finite at the initial momenta");

    const int stage_no = static_cast<int>(stage_idx);
    auto record = [&](int iteration, double step) {
      HistoryEntry h{stage_no, iteration, current.value.total, current.value.energy, current.value.fidelity, step};
      result.history.push_back(h);
      if (observer) observer(h);
    };
    record(0, 0.0);

    double step = cfg.step_init;
    result.converged = false;
    result.reason = "iteration limit";
    int iteration = 0;
    while (iteration < stage.iters) {
      const ObjectiveGradient g = gradient_from_evaluation(result.p0, result.pf, current, problem);
      const double gnorm = std::sqrt(g.p0.squaredNorm() + g.pf.squaredNorm());
      if (!(gnorm >= cfg.grad_tol)) {
        result.converged = std::isfinite(gnorm);
        result.reason = result.converged ? "gradient tolerance" : "non-finite gradient";
        break;
      }
      bool accepted = false;
      while (step >= 1e-12 * cfg.step_init) {
        const Matrix p0_try = result.p0 - step * g.p0;
        const Vector pf_try = result.pf - step * g.pf;
        Evaluation trial;
        bool ok = true;
        try {
          trial = evaluate(p0_try, pf_try, problem);
        } catch (const Error&) {
          ok = false;  // e.g. a cell collapsed along the trial geodesic
        }
        if (ok && std::isfinite(trial.value.total) && trial.value.total < current.value.total) {
          result.p0 = p0_try;
          result.pf = pf_try;
          current = std::move(trial);
          accepted = true;
          break;
        }
        step *= cfg.step_shrink;
      }
      if (!accepted) {
        result.reason = "step underflow";
        break;
      }
      ++iteration;
      record(iteration, step);
      step *= cfg.step_grow;
    }
    result.trajectory = std::move(current.trajectory);
  }
  return result;
}

}  // namespace fshapes
