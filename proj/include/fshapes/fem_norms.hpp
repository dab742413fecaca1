#pragma once

// Signal metrics D_s(x) on simplicial meshes: lumped and P1 mass matrices,
// the H1 matrix (P1 mass + piecewise-constant-gradient stiffness), SPD solves
// and the position derivative of f^T D_s(x) f.

#include "fshapes/fshape.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace fshapes {

enum class MassScheme { kLumped, kP1 };

struct FunctionalMetric {
  int order = 0;  // Sobolev order s, 0 or 1
  MassScheme scheme = MassScheme::kLumped;

  void validate() const {
    if (order != 0 && order != 1) throw InvalidInput("metric order must be 0 or 1");
    if (order == 1 && scheme != MassScheme::kP1) throw InvalidInput("H1 metric requires the p1 scheme");
  }
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual) : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Symmetric sparse matrix (full storage). Diagonal matrices are flagged so
/// solves reduce to a division.
class SparseSymmetricMatrix {
 public:
  using Triplet = Eigen::Triplet<double>;

  SparseSymmetricMatrix() = default;
  SparseSymmetricMatrix(Index dim, const std::vector<Triplet>& triplets, bool diagonal)
      : mat_(dim, dim), diagonal_(diagonal) {
    mat_.setFromTriplets(triplets.begin(), triplets.end());
    mat_.makeCompressed();
  }

  Index dimension() const { return mat_.rows(); }
  bool is_diagonal() const { return diagonal_; }
  const Eigen::SparseMatrix<double>& matrix() const { return mat_; }
  double coeff(Index i, Index j) const { return mat_.coeff(i, j); }
  Vector diagonal() const { return mat_.diagonal(); }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> out;
    for (Index k = 0; k < mat_.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(mat_, k); it; ++it) {
        out.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
      }
    }
    return out;
  }

  Vector operator*(const Vector& v) const { return mat_ * v; }

 private:
  Eigen::SparseMatrix<double> mat_;
  bool diagonal_ = false;
};

namespace detail {

inline void require_fem_dim(const Cells& cells) {
  const int d = static_cast<int>(cells.cols()) - 1;
  if (d != 1 && d != 2) throw InvalidInput("finite-element metrics support d = 1 or 2 only");
}

inline void check_cell_volume(double vol, double threshold, Index t) {
  if (!(vol >= threshold) || vol == 0.0) throw DegenerateCellError(t, vol);
}

// Local P1 mass matrix divided by the cell volume.
inline double p1_local_mass(int d, int i, int j) {
  if (d == 1) return (i == j ? 2.0 : 1.0) / 6.0;
  return (i == j ? 2.0 : 1.0) / 12.0;
}

}  // namespace detail

inline SparseSymmetricMatrix assemble_D0_lumped(const Matrix& x, const Cells& cells) {
  detail::require_fem_dim(cells);
  const int d = static_cast<int>(cells.cols()) - 1;
  const double threshold = detail::degeneracy_threshold(x, d);
  Vector diag = Vector::Zero(x.rows());
  for (Index t = 0; t < cells.rows(); ++t) {
    const double r = detail::simplex_volume(x, cells, t);
    detail::check_cell_volume(r, threshold, t);
    for (int j = 0; j <= d; ++j) diag[cells(t, j)] += r / (d + 1);
  }
  std::vector<SparseSymmetricMatrix::Triplet> trip;
  trip.reserve(x.rows());
  for (Index k = 0; k < x.rows(); ++k) trip.emplace_back(static_cast<int>(k), static_cast<int>(k), diag[k]);
  return SparseSymmetricMatrix(x.rows(), trip, true);
}

namespace detail {

inline void append_p1_mass(const Matrix& x, const Cells& cells, std::vector<SparseSymmetricMatrix::Triplet>& trip) {
  const int d = static_cast<int>(cells.cols()) - 1;
  const double threshold = degeneracy_threshold(x, d);
  for (Index t = 0; t < cells.rows(); ++t) {
    const double r = simplex_volume(x, cells, t);
    check_cell_volume(r, threshold, t);
    for (int i = 0; i <= d; ++i) {
      for (int j = 0; j <= d; ++j) trip.emplace_back(cells(t, i), cells(t, j), r * p1_local_mass(d, i, j));
    }
  }
}

inline void append_stiffness(const Matrix& x, const Cells& cells, std::vector<SparseSymmetricMatrix::Triplet>& trip) {
  const int d = static_cast<int>(cells.cols()) - 1;
  const double threshold = degeneracy_threshold(x, d);
  for (Index t = 0; t < cells.rows(); ++t) {
    const double r = simplex_volume(x, cells, t);
    check_cell_volume(r, threshold, t);
    if (d == 1) {
      const double w = 1.0 / r;
      const int a = cells(t, 0), b = cells(t, 1);
      trip.emplace_back(a, a, w);
      trip.emplace_back(b, b, w);
      trip.emplace_back(a, b, -w);
      trip.emplace_back(b, a, -w);
      continue;
    }
    const auto e1 = x.row(cells(t, 1)) - x.row(cells(t, 0));
    const auto e2 = x.row(cells(t, 2)) - x.row(cells(t, 0));
    const double ga = e1.squaredNorm(), gb = e1.dot(e2), gc = e2.squaredNorm();
    const double s = 2.0 * std::sqrt(ga * gc - gb * gb);
    // r |grad f~|^2 = (c d1^2 - 2 b d1 d2 + a d2^2) / (2 sqrt(ac - b^2)), d_i = f_i - f_0.
    Eigen::Matrix2d Q;
    Q << gc / s, -gb / s, -gb / s, ga / s;
    // Map (f0, f1, f2) -> (d1, d2).
    Eigen::Matrix<double, 2, 3> B;
    B << -1, 1, 0, -1, 0, 1;
    const Eigen::Matrix3d local = B.transpose() * Q * B;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) trip.emplace_back(cells(t, i), cells(t, j), local(i, j));
    }
  }
}

}  // namespace detail

inline SparseSymmetricMatrix assemble_D0_p1(const Matrix& x, const Cells& cells) {
  detail::require_fem_dim(cells);
  std::vector<SparseSymmetricMatrix::Triplet> trip;
  trip.reserve(cells.size() * cells.cols());
  detail::append_p1_mass(x, cells, trip);
  return SparseSymmetricMatrix(x.rows(), trip, false);
}

/// Stiffness part alone: f^T S f = sum_cells r |grad f~|^2.
inline SparseSymmetricMatrix assemble_stiffness(const Matrix& x, const Cells& cells) {
  detail::require_fem_dim(cells);
  std::vector<SparseSymmetricMatrix::Triplet> trip;
  trip.reserve(cells.size() * cells.cols());
  detail::append_stiffness(x, cells, trip);
  return SparseSymmetricMatrix(x.rows(), trip, false);
}

inline SparseSymmetricMatrix assemble_D1(const Matrix& x, const Cells& cells) {
  detail::require_fem_dim(cells);
  std::vector<SparseSymmetricMatrix::Triplet> trip;
  trip.reserve(2 * cells.size() * cells.cols());
  detail::append_p1_mass(x, cells, trip);
  detail::append_stiffness(x, cells, trip);
  return SparseSymmetricMatrix(x.rows(), trip, false);
}

inline SparseSymmetricMatrix assemble_D0_lumped(const Fshape& fs) { return assemble_D0_lumped(fs.vertices, fs.cells); }
inline SparseSymmetricMatrix assemble_D0_p1(const Fshape& fs) { return assemble_D0_p1(fs.vertices, fs.cells); }
inline SparseSymmetricMatrix assemble_D1(const Fshape& fs) { return assemble_D1(fs.vertices, fs.cells); }

inline SparseSymmetricMatrix assemble_metric(const FunctionalMetric& metric, const Matrix& x, const Cells& cells) {
  metric.validate();
  if (metric.order == 1) return assemble_D1(x, cells);
  return metric.scheme == MassScheme::kLumped ? assemble_D0_lumped(x, cells) : assemble_D0_p1(x, cells);
}

inline double quadratic_form(const SparseSymmetricMatrix& D, const Vector& f) {
  if (f.size() != D.dimension()) throw InvalidInput("quadratic_form: vector length mismatch");
  return f.dot(D * f);
}

/// Solves D h = rhs by conjugate gradients with a Jacobi preconditioner.
/// Postcondition: ||D h - rhs|| <= rel_tol ||rhs||.
inline Vector solve_Ds(const SparseSymmetricMatrix& D, const Vector& rhs, double rel_tol = 1e-10,
                       Index max_iterations = 0) {
  if (rhs.size() != D.dimension()) throw InvalidInput("solve_Ds: right-hand side length mismatch");
  if (!rhs.allFinite()) throw InvalidInput("solve_Ds: right-hand side is not finite");
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return Vector::Zero(rhs.size());
  if (D.is_diagonal()) return rhs.cwiseQuotient(D.diagonal());

  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  cg.setTolerance(rel_tol);
  cg.setMaxIterations(max_iterations > 0 ? max_iterations : 10 * D.dimension());
  cg.compute(D.matrix());
  Vector h = cg.solve(rhs);
  double residual = (D.matrix() * h - rhs).norm() / rhs_norm;
  // The recurrence residual drifts from the true one near roundoff; restart
  // on the true residual a few times.
  for (int restart = 0; restart < 4 && !(residual <= rel_tol) && std::isfinite(residual); ++restart) {
    const Vector r = rhs - D.matrix() * h;
    cg.setTolerance(std::min(0.5, rel_tol * rhs_norm / r.norm()));
    h += cg.solve(r);
    residual = (D.matrix() * h - rhs).norm() / rhs_norm;
  }
  if (!(residual <= rel_tol)) {
    throw SolverError("conjugate gradients did not converge: relative residual " + std::to_string(residual) +
                          " after " + std::to_string(cg.iterations()) + " iterations",
                      residual);
  }
  return h;
}

namespace detail {

// Adds the gradient of `weight * r_t` (cell d-volume) with respect to the cell vertices.
inline void add_volume_gradient(const Matrix& x, const Cells& cells, Index t, double weight, Matrix& g) {
  const int d = static_cast<int>(cells.cols()) - 1;
  const Eigen::RowVectorXd e1 = x.row(cells(t, 1)) - x.row(cells(t, 0));
  if (d == 1) {
    const Eigen::RowVectorXd ge = weight * e1 / e1.norm();
    g.row(cells(t, 1)) += ge;
    g.row(cells(t, 0)) -= ge;
    return;
  }
  const Eigen::RowVectorXd e2 = x.row(cells(t, 2)) - x.row(cells(t, 0));
  const double a = e1.squaredNorm(), b = e1.dot(e2), c = e2.squaredNorm();
  const double det = a * c - b * b;
  // r = sqrt(det)/2; dr/da = c/(4 sqrt det), dr/db = -b/(2 sqrt det), dr/dc = a/(4 sqrt det).
  const double sq = std::sqrt(det);
  const double ra = c / (4.0 * sq), rb = -b / (2.0 * sq), rc = a / (4.0 * sq);
  const Eigen::RowVectorXd ge1 = weight * (2.0 * ra * e1 + rb * e2);
  const Eigen::RowVectorXd ge2 = weight * (rb * e1 + 2.0 * rc * e2);
  g.row(cells(t, 1)) += ge1;
  g.row(cells(t, 2)) += ge2;
  g.row(cells(t, 0)) -= ge1 + ge2;
}

// Adds the gradient of the cell stiffness r |grad f~|^2 with respect to positions.
inline void add_stiffness_gradient(const Matrix& x, const Cells& cells, Index t, const Vector& h, Matrix& g) {
  const int d = static_cast<int>(cells.cols()) - 1;
  const Eigen::RowVectorXd e1 = x.row(cells(t, 1)) - x.row(cells(t, 0));
  if (d == 1) {
    // S = (h1 - h0)^2 / L.
    const double dh = h[cells(t, 1)] - h[cells(t, 0)];
    const double L = e1.norm();
    const Eigen::RowVectorXd ge = (-dh * dh / (L * L * L)) * e1;
    g.row(cells(t, 1)) += ge;
    g.row(cells(t, 0)) -= ge;
    return;
  }
  const Eigen::RowVectorXd e2 = x.row(cells(t, 2)) - x.row(cells(t, 0));
  const double a = e1.squaredNorm(), b = e1.dot(e2), c = e2.squaredNorm();
  const double d1 = h[cells(t, 1)] - h[cells(t, 0)];
  const double d2 = h[cells(t, 2)] - h[cells(t, 0)];
  const double N = c * d1 * d1 - 2.0 * b * d1 * d2 + a * d2 * d2;
  const double s = std::sqrt(a * c - b * b);
  // S = N / (2 s), ds/da = c/(2s), ds/db = -b/s, ds/dc = a/(2s).
  const double Sa = d2 * d2 / (2.0 * s) - N / (2.0 * s * s) * (c / (2.0 * s));
  const double Sb = -d1 * d2 / s - N / (2.0 * s * s) * (-b / s);
  const double Sc = d1 * d1 / (2.0 * s) - N / (2.0 * s * s) * (a / (2.0 * s));
  const Eigen::RowVectorXd ge1 = 2.0 * Sa * e1 + Sb * e2;
  const Eigen::RowVectorXd ge2 = Sb * e1 + 2.0 * Sc * e2;
  g.row(cells(t, 1)) += ge1;
  g.row(cells(t, 2)) += ge2;
  g.row(cells(t, 0)) -= ge1 + ge2;
}

}  // namespace detail

/// Gradient of h^T D_s(x) h with respect to x, h held fixed.
inline Matrix dx_quadratic_form(const Matrix& x, const Cells& cells, const FunctionalMetric& metric, const Vector& h) {
  metric.validate();
  detail::require_fem_dim(cells);
  if (h.size() != x.rows()) throw InvalidInput("dx_quadratic_form: h length mismatch");
  const int d = static_cast<int>(cells.cols()) - 1;
  const double threshold = detail::degeneracy_threshold(x, d);
  Matrix g = Matrix::Zero(x.rows(), x.cols());
  for (Index t = 0; t < cells.rows(); ++t) {
    detail::check_cell_volume(detail::simplex_volume(x, cells, t), threshold, t);
    // Mass part is r_t times a volume-free quadratic form in the cell values.
    double q = 0.0;
    if (metric.order == 0 && metric.scheme == MassScheme::kLumped) {
      for (int j = 0; j <= d; ++j) q += h[cells(t, j)] * h[cells(t, j)];
      q /= (d + 1);
    } else {
      for (int i = 0; i <= d; ++i) {
        for (int j = 0; j <= d; ++j) q += h[cells(t, i)] * detail::p1_local_mass(d, i, j) * h[cells(t, j)];
      }
    }
    detail::add_volume_gradient(x, cells, t, q, g);
    if (metric.order == 1) detail::add_stiffness_gradient(x, cells, t, h, g);
  }
  return g;
}

inline Matrix dx_quadratic_form(const Fshape& fs, const FunctionalMetric& metric, const Vector& h) {
  return dx_quadratic_form(fs.vertices, fs.cells, metric, h);
}

inline const char* to_string(MassScheme s) { return s == MassScheme::kLumped ? "lumped" : "p1"; }

inline MassScheme mass_scheme_from_string(const std::string& s) {
  if (s == "lumped") return MassScheme::kLumped;
  if (s == "p1") return MassScheme::kP1;
  throw InvalidInput("unknown mass scheme '" + s + "'");
}

}  // namespace fshapes
