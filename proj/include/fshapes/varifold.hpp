#pragma once

// Functional varifold fidelity: each cell becomes a weighted Dirac at its
// barycenter carrying its unit frame and mean signal; shapes are compared
// with the product kernel k_p * k_f * k_t.

#include "fshapes/fshape.hpp"
#include "fshapes/kernels.hpp"

#include <algorithm>
#include <utility>
#include <vector>

namespace fshapes {

struct VarifoldKernels {
  RadialKernelSpec position = RadialKernelSpec::gaussian(0.05);
  RadialKernelSpec signal = RadialKernelSpec::gaussian(0.7);
  GrassmannKernelSpec tangent{};

  /// Final-scale kernels used for the flat-square digit experiments.
  static VarifoldKernels digits_preset() { return {}; }

  void validate() const {
    position.validate();
    signal.validate();
  }

  VarifoldKernels scaled(double position_factor, double signal_factor) const {
    return {position.scaled(position_factor), signal.scaled(signal_factor), tangent};
  }
};

struct DiscreteVarifold {
  Matrix centers;
  Matrix frames;
  Vector weights;
  Vector cell_signals;

  Index size() const { return centers.rows(); }
};

inline DiscreteVarifold to_varifold(const CellGeometry& g) {
  return {g.centers, g.frames, g.volumes, g.cell_signals};
}

inline DiscreteVarifold to_varifold(const Fshape& fs) { return to_varifold(cell_geometry(fs)); }

/// sum_{a,b} k_p(c_a, c'_b) k_f(s_a, s'_b) k_t(u_a, u'_b) w_a w'_b.
inline double fvar_inner(const DiscreteVarifold& a, const DiscreteVarifold& b, const VarifoldKernels& K) {
  if (a.centers.cols() != b.centers.cols()) throw InvalidInput("fvar_inner: ambient dimension mismatch");
  const Index n = a.centers.cols(), m = a.frames.cols();
  Vector rows(a.size());
  for (Index i = 0; i < a.size(); ++i) {
    const double* ci = a.centers.data() + i * n;
    const double* ui = a.frames.data() + i * m;
    double s = 0.0;
    for (Index j = 0; j < b.size(); ++j) {
      const double* cj = b.centers.data() + j * n;
      const double* uj = b.frames.data() + j * m;
      double dist = 0.0, dot = 0.0;
      for (Index c = 0; c < n; ++c) dist += (ci[c] - cj[c]) * (ci[c] - cj[c]);
      for (Index c = 0; c < m; ++c) dot += ui[c] * uj[c];
      const double ds = a.cell_signals[i] - b.cell_signals[j];
      s += K.position(dist) * K.signal(ds * ds) * detail::grassmann_value(K.tangent.mode, dot) * b.weights[j];
    }
    rows[i] = s * a.weights[i];
  }
  return rows.sum();
}

namespace detail {

// Adds d/d(cell data of a) of  scale * <a, b>  to `g`.
inline void accumulate_inner_gradient(const DiscreteVarifold& a, const DiscreteVarifold& b, const VarifoldKernels& K,
                                      double scale, CellGeometryGradient& g) {
  const Index n = a.centers.cols(), m = a.frames.cols();
  std::vector<double> gc(n), gu(m);
  for (Index i = 0; i < a.size(); ++i) {
    const double* ci = a.centers.data() + i * n;
    const double* ui = a.frames.data() + i * m;
    std::fill(gc.begin(), gc.end(), 0.0);
    std::fill(gu.begin(), gu.end(), 0.0);
    double gw = 0.0, gs = 0.0;
    for (Index j = 0; j < b.size(); ++j) {
      const double* cj = b.centers.data() + j * n;
      const double* uj = b.frames.data() + j * m;
      double dist = 0.0, dot = 0.0;
      for (Index c = 0; c < n; ++c) dist += (ci[c] - cj[c]) * (ci[c] - cj[c]);
      for (Index c = 0; c < m; ++c) dot += ui[c] * uj[c];
      double kp, dkp;
      K.position.eval_with_derivative(dist, kp, dkp);
      const double ds = a.cell_signals[i] - b.cell_signals[j];
      double kf, dkf;
      K.signal.eval_with_derivative(ds * ds, kf, dkf);
      const double kt = grassmann_value(K.tangent.mode, dot);
      const double dkt = grassmann_dot_derivative(K.tangent.mode, dot);
      const double wb = b.weights[j];
      const double wc = 2.0 * dkp * kf * kt * wb, wu = kp * kf * dkt * wb;
      for (Index c = 0; c < n; ++c) gc[c] += wc * (ci[c] - cj[c]);
      for (Index c = 0; c < m; ++c) gu[c] += wu * uj[c];
      gs += 2.0 * ds * dkf * kp * kt * wb;
      gw += kp * kf * kt * wb;
    }
    const double wa = a.weights[i];
    for (Index c = 0; c < n; ++c) g.centers(i, c) += scale * wa * gc[c];
    for (Index c = 0; c < m; ++c) g.frames(i, c) += scale * wa * gu[c];
    g.cell_signals[i] += scale * wa * gs;
    g.volumes[i] += scale * gw;
  }
}

}  // namespace detail

/// ||mu - nu||^2 in the fvarifold RKHS, clamped at zero against roundoff.
inline double fidelity(const DiscreteVarifold& source, const DiscreteVarifold& target, const VarifoldKernels& K,
                       double target_self) {
  const double v = fvar_inner(source, source, K) - 2.0 * fvar_inner(source, target, K) + target_self;
  return std::max(v, 0.0);
}

inline double fidelity(const Fshape& fs1, const DiscreteVarifold& target, const VarifoldKernels& K) {
  return fidelity(to_varifold(fs1), target, K, fvar_inner(target, target, K));
}

struct FidelityGradient {
  Matrix dx;
  Vector df;
};

/// Exact gradient of the discrete fidelity with respect to vertex positions
/// and vertex signals.
inline FidelityGradient grad_fidelity(const Matrix& x, const Vector& f, const Cells& cells,
                                      const DiscreteVarifold& target, const VarifoldKernels& K) {
  const CellGeometry geom = cell_geometry(x, f, cells);
  const DiscreteVarifold mu = to_varifold(geom);
  auto g = CellGeometryGradient::zeros(mu.size(), x.cols());
  // d<mu,mu> = 2 * one-sided derivative by symmetry of the kernel.
  detail::accumulate_inner_gradient(mu, mu, K, 2.0, g);
  detail::accumulate_inner_gradient(mu, target, K, -2.0, g);
  auto [dx, df] = pullback_cell_gradient(x, cells, geom, g);
  return {std::move(dx), std::move(df)};
}

inline FidelityGradient grad_fidelity(const Fshape& fs1, const DiscreteVarifold& target, const VarifoldKernels& K) {
  return grad_fidelity(fs1.vertices, fs1.signals, fs1.cells, target, K);
}

/// A fixed target with its self inner product cached.
class FidelityTerm {
 public:
  FidelityTerm() = default;
  FidelityTerm(DiscreteVarifold target, VarifoldKernels kernels)
      : target_(std::move(target)), kernels_(std::move(kernels)) {
    kernels_.validate();
    target_self_ = fvar_inner(target_, target_, kernels_);
  }
  FidelityTerm(const Fshape& target, VarifoldKernels kernels) : FidelityTerm(to_varifold(target), std::move(kernels)) {}

  double value(const Matrix& x, const Vector& f, const Cells& cells) const {
    return fidelity(to_varifold(cell_geometry(x, f, cells)), target_, kernels_, target_self_);
  }
  FidelityGradient gradient(const Matrix& x, const Vector& f, const Cells& cells) const {
    return grad_fidelity(x, f, cells, target_, kernels_);
  }

  const DiscreteVarifold& target() const { return target_; }
  const VarifoldKernels& kernels() const { return kernels_; }
  double target_self() const { return target_self_; }

 private:
  DiscreteVarifold target_;
  VarifoldKernels kernels_;
  double target_self_ = 0.0;
};

}  // namespace fshapes
