#pragma once

// Radial and Grassmann kernels, kernel sums and the gradients of kernel
// quadratic forms. All sums are direct O(PQ); output rows are independent and
// each row accumulates in a fixed order, so results are reproducible.

#include "fshapes/fshape.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace fshapes {

enum class RadialFamily { kGaussian, kCauchy };

struct KernelTerm {
  double weight = 1.0;
  double sigma = 1.0;
};

/// Weighted sum of radial profiles k(u), u = |x - y|^2.
struct RadialKernelSpec {
  RadialFamily family = RadialFamily::kGaussian;
  std::vector<KernelTerm> terms{KernelTerm{}};

  static RadialKernelSpec gaussian(double sigma, double weight = 1.0) {
    return {RadialFamily::kGaussian, {KernelTerm{weight, sigma}}};
  }
  static RadialKernelSpec cauchy(double sigma, double weight = 1.0) {
    return {RadialFamily::kCauchy, {KernelTerm{weight, sigma}}};
  }

  void validate() const {
    if (terms.empty()) throw InvalidInput("radial kernel needs at least one term");
    for (const auto& t : terms) {
      if (!(t.weight > 0.0) || !(t.sigma > 0.0)) {
        throw InvalidInput("radial kernel weights and widths must be strictly positive");
      }
    }
  }

  /// Same profile with every width multiplied by `factor`.
  RadialKernelSpec scaled(double factor) const {
    RadialKernelSpec out = *this;
    for (auto& t : out.terms) t.sigma *= factor;
    return out;
  }

  double operator()(double u) const {
    double s = 0.0;
    if (family == RadialFamily::kGaussian) {
      for (const auto& t : terms) s += t.weight * std::exp(-u / (2.0 * t.sigma * t.sigma));
    } else {
      for (const auto& t : terms) s += t.weight / (1.0 + u / (t.sigma * t.sigma));
    }
    return s;
  }

  /// dk/du.
  double derivative(double u) const {
    double s = 0.0;
    if (family == RadialFamily::kGaussian) {
      for (const auto& t : terms) {
        const double a = 1.0 / (2.0 * t.sigma * t.sigma);
        s -= t.weight * a * std::exp(-u * a);
      }
    } else {
      for (const auto& t : terms) {
        const double inv = 1.0 / (t.sigma * t.sigma);
        const double den = 1.0 + u * inv;
        s -= t.weight * inv / (den * den);
      }
    }
    return s;
  }

  // Value and derivative in one pass (shares the exponentials).
  void eval_with_derivative(double u, double& k, double& dk) const {
    k = 0.0;
    dk = 0.0;
    if (family == RadialFamily::kGaussian) {
      for (const auto& t : terms) {
        const double a = 1.0 / (2.0 * t.sigma * t.sigma);
        const double e = t.weight * std::exp(-u * a);
        k += e;
        dk -= a * e;
      }
    } else {
      for (const auto& t : terms) {
        const double inv = 1.0 / (t.sigma * t.sigma);
        const double r = 1.0 / (1.0 + u * inv);
        k += t.weight * r;
        dk -= t.weight * inv * r * r;
      }
    }
  }
};

inline double radial_eval(const RadialKernelSpec& spec, double squared_distance) { return spec(squared_distance); }

namespace detail {

inline void require_same_cols(const Matrix& a, const Matrix& b, const char* what) {
  if (a.cols() != b.cols()) throw InvalidInput(std::string(what) + ": ambient dimension mismatch");
}

template <class RowA, class RowB>
double squared_distance(const RowA& a, const RowB& b) {
  return (a - b).squaredNorm();
}

}  // namespace detail

/// out[i] = sum_j k(|x_i - y_j|^2) alpha_j.
inline Matrix kernel_conv(const RadialKernelSpec& spec, const Matrix& x, const Matrix& y, const Matrix& alpha) {
  detail::require_same_cols(x, y, "kernel_conv");
  if (alpha.rows() != y.rows() || alpha.cols() != y.cols()) {
    throw InvalidInput("kernel_conv: alpha must have the shape of y");
  }
  const Index n = x.cols(), m = alpha.cols();
  Matrix out = Matrix::Zero(x.rows(), m);
  for (Index i = 0; i < x.rows(); ++i) {
    const double* xi = x.data() + i * n;
    double* oi = out.data() + i * m;
    for (Index j = 0; j < y.rows(); ++j) {
      const double* yj = y.data() + j * n;
      double u = 0.0;
      for (Index c = 0; c < n; ++c) u += (xi[c] - yj[c]) * (xi[c] - yj[c]);
      const double k = spec(u);
      const double* aj = alpha.data() + j * m;
      for (Index c = 0; c < m; ++c) oi[c] += k * aj[c];
    }
  }
  return out;
}

/// sum_{k,l} k(|x_k - x_l|^2) <p_k, p_l>.
inline double quad_form(const RadialKernelSpec& spec, const Matrix& x, const Matrix& p) {
  if (p.rows() != x.rows() || p.cols() != x.cols()) throw InvalidInput("quad_form: p must have the shape of x");
  const Index n = x.cols();
  Vector rows(x.rows());
  for (Index k = 0; k < x.rows(); ++k) {
    const double* xk = x.data() + k * n;
    const double* pk = p.data() + k * n;
    double s = 0.0;
    for (Index l = 0; l < x.rows(); ++l) {
      const double* xl = x.data() + l * n;
      const double* pl = p.data() + l * n;
      double u = 0.0, dot = 0.0;
      for (Index c = 0; c < n; ++c) {
        u += (xk[c] - xl[c]) * (xk[c] - xl[c]);
        dot += pk[c] * pl[c];
      }
      s += spec(u) * dot;
    }
    rows[k] = s;
  }
  return rows.sum();
}

/// K(x, x) p and the gradient of quad_form(x, p) in x, from one pass over
/// unordered pairs.
inline void kernel_self_terms(const RadialKernelSpec& spec, const Matrix& x, const Matrix& p, Matrix& conv,
                              Matrix& grad) {
  if (p.rows() != x.rows() || p.cols() != x.cols()) {
    throw InvalidInput("kernel_self_terms: p must have the shape of x");
  }
  const Index P = x.rows(), n = x.cols();
  const double k0 = spec(0.0);
  conv = k0 * p;
  grad = Matrix::Zero(P, n);
  for (Index i = 0; i < P; ++i) {
    const double* xi = x.data() + i * n;
    const double* pi = p.data() + i * n;
    double* ci = conv.data() + i * n;
    double* gi = grad.data() + i * n;
    for (Index j = i + 1; j < P; ++j) {
      const double* xj = x.data() + j * n;
      const double* pj = p.data() + j * n;
      double u = 0.0, dot = 0.0;
      for (Index c = 0; c < n; ++c) {
        u += (xi[c] - xj[c]) * (xi[c] - xj[c]);
        dot += pi[c] * pj[c];
      }
      double k, dk;
      spec.eval_with_derivative(u, k, dk);
      const double w = 4.0 * dk * dot;
      double* cj = conv.data() + j * n;
      double* gj = grad.data() + j * n;
      for (Index c = 0; c < n; ++c) {
        ci[c] += k * pj[c];
        cj[c] += k * pi[c];
        gi[c] += w * (xi[c] - xj[c]);
        gj[c] -= w * (xi[c] - xj[c]);
      }
    }
  }
}

/// Gradient of quad_form with respect to every point coordinate.
inline Matrix quad_form_grad_x(const RadialKernelSpec& spec, const Matrix& x, const Matrix& p) {
  if (p.rows() != x.rows() || p.cols() != x.cols()) {
    throw InvalidInput("quad_form_grad_x: p must have the shape of x");
  }
  Matrix conv, grad;
  kernel_self_terms(spec, x, p, conv, grad);
  return grad;
}

/// k_f(a, b) = k((a - b)^2).
inline double scalar_kernel_eval(const RadialKernelSpec& spec, double a, double b) {
  return spec((a - b) * (a - b));
}

/// d/da k_f(a, b).
inline double scalar_kernel_grad(const RadialKernelSpec& spec, double a, double b) {
  return 2.0 * (a - b) * spec.derivative((a - b) * (a - b));
}

enum class GrassmannMode { kUnorientedSquared, kOrientedLinear, kConstant };

struct GrassmannKernelSpec {
  GrassmannMode mode = GrassmannMode::kUnorientedSquared;
};

namespace detail {

inline void require_unit(const Eigen::RowVectorXd& u, const char* what) {
  if (std::abs(u.norm() - 1.0) > 1e-8) throw InvalidInput(std::string(what) + ": frame vectors must be unit");
}

inline double grassmann_value(GrassmannMode mode, double dot) {
  switch (mode) {
    case GrassmannMode::kUnorientedSquared:
      return dot * dot;
    case GrassmannMode::kOrientedLinear:
      return dot;
    case GrassmannMode::kConstant:
      return 1.0;
  }
  return 1.0;
}

// d k_t / d(u . v).
inline double grassmann_dot_derivative(GrassmannMode mode, double dot) {
  switch (mode) {
    case GrassmannMode::kUnorientedSquared:
      return 2.0 * dot;
    case GrassmannMode::kOrientedLinear:
      return 1.0;
    case GrassmannMode::kConstant:
      return 0.0;
  }
  return 0.0;
}

}  // namespace detail

inline double grassmann_eval(const GrassmannKernelSpec& spec, const Eigen::RowVectorXd& u,
                             const Eigen::RowVectorXd& v) {
  detail::require_unit(u, "grassmann_eval");
  detail::require_unit(v, "grassmann_eval");
  return detail::grassmann_value(spec.mode, u.dot(v));
}

/// Gradient in u projected onto the tangent space of the unit sphere at u.
inline Eigen::RowVectorXd grassmann_grad(const GrassmannKernelSpec& spec, const Eigen::RowVectorXd& u,
                                         const Eigen::RowVectorXd& v) {
  detail::require_unit(u, "grassmann_grad");
  detail::require_unit(v, "grassmann_grad");
  const double dot = u.dot(v);
  const Eigen::RowVectorXd raw = detail::grassmann_dot_derivative(spec.mode, dot) * v;
  return raw - raw.dot(u) * u;
}

inline const char* to_string(RadialFamily f) { return f == RadialFamily::kGaussian ? "gaussian" : "cauchy"; }

inline RadialFamily radial_family_from_string(const std::string& s) {
  if (s == "gaussian") return RadialFamily::kGaussian;
  if (s == "cauchy") return RadialFamily::kCauchy;
  throw InvalidInput("unknown kernel family '" + s + "'");
}

inline const char* to_string(GrassmannMode m) {
  switch (m) {
    case GrassmannMode::kUnorientedSquared:
      return "unoriented_squared";
    case GrassmannMode::kOrientedLinear:
      return "oriented_linear";
    case GrassmannMode::kConstant:
      return "constant";
  }
  return "constant";
}

inline GrassmannMode grassmann_mode_from_string(const std::string& s) {
  if (s == "unoriented_squared") return GrassmannMode::kUnorientedSquared;
  if (s == "oriented_linear") return GrassmannMode::kOrientedLinear;
  if (s == "constant") return GrassmannMode::kConstant;
  throw InvalidInput("unknown Grassmann kernel mode '" + s + "'");
}

}  // namespace fshapes
