#pragma once

// Discrete functional shapes: vertices, per-vertex signal, simplicial cells.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fshapes {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Cells = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when an input does not satisfy a documented precondition
/// (bad shapes, malformed files, invalid configuration).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class DegenerateCellError : public Error {
 public:
  explicit DegenerateCellError(Index cell, double volume)
      : Error("degenerate cell " + std::to_string(cell) + " (d-volume " + std::to_string(volume) + ")"),
        cell_(cell) {}
  Index cell() const { return cell_; }

 private:
  Index cell_;
};

/// A polyhedral mesh of d-simplices in R^n carrying one scalar per vertex.
/// Cell indices are 0-based.
struct Fshape {
  Matrix vertices;  // P x n
  Vector signals;   // P
  Cells cells;      // T x (d+1)

  Index num_vertices() const { return vertices.rows(); }
  Index num_cells() const { return cells.rows(); }
  int cell_dim() const { return static_cast<int>(cells.cols()) - 1; }
  int ambient_dim() const { return static_cast<int>(vertices.cols()); }
};

struct Violation {
  enum class Kind {
    kUnsupportedDimension,
    kSignalCount,
    kTooFewVertices,
    kNoCells,
    kIndexOutOfRange,
    kRepeatedIndex,
    kDegenerateCell,
    kNonFinite,
  };
  Kind kind;
  Index index;  // offending cell or vertex, -1 when global
  std::string message;
};

namespace detail {

inline double bbox_diagonal(const Matrix& x) {
  if (x.rows() == 0) return 0.0;
  return (x.colwise().maxCoeff() - x.colwise().minCoeff()).norm();
}

// d-volume of a simplex from its Gram matrix; valid in any ambient dimension.
template <class Rows>
double simplex_volume(const Rows& x, const Cells& cells, Index t) {
  const int d = static_cast<int>(cells.cols()) - 1;
  const auto e1 = x.row(cells(t, 1)) - x.row(cells(t, 0));
  if (d == 1) return e1.norm();
  const auto e2 = x.row(cells(t, 2)) - x.row(cells(t, 0));
  const double a = e1.squaredNorm(), b = e1.dot(e2), c = e2.squaredNorm();
  return 0.5 * std::sqrt(std::max(a * c - b * b, 0.0));
}

inline double degeneracy_threshold(const Matrix& x, int d) {
  return 1e-12 * std::pow(bbox_diagonal(x), d);
}

}  // namespace detail

/// Checks every structural invariant of `fs`. Returns an empty list iff the
/// fshape is well formed; never throws.
inline std::vector<Violation> validate_fshape(const Fshape& fs) {
  std::vector<Violation> out;
  using K = Violation::Kind;
  const Index P = fs.num_vertices();
  const Index T = fs.num_cells();
  const int d = fs.cell_dim();
  const int n = fs.ambient_dim();

  if (d < 1 || d > 2 || n < 2 || n > 3 || (d == 2 && n != 3)) {
    out.push_back({K::kUnsupportedDimension, -1,
                   "unsupported (d, n) = (" + std::to_string(d) + ", " + std::to_string(n) +
                       "); expected d=1 with n in {2,3} or d=2 with n=3"});
    return out;
  }
  if (fs.signals.size() != P) {
    out.push_back({K::kSignalCount, -1,
                   "signal count " + std::to_string(fs.signals.size()) + " != vertex count " +
                       std::to_string(P)});
  }
  if (P < d + 1) {
    out.push_back({K::kTooFewVertices, -1,
                   "need at least " + std::to_string(d + 1) + " vertices, got " + std::to_string(P)});
  }
  if (T < 1) out.push_back({K::kNoCells, -1, "mesh has no cells"});

  for (Index k = 0; k < P; ++k) {
    if (!fs.vertices.row(k).allFinite() || (k < fs.signals.size() && !std::isfinite(fs.signals[k]))) {
      out.push_back({K::kNonFinite, k, "vertex " + std::to_string(k) + " has a non-finite value"});
    }
  }

  const double threshold = detail::degeneracy_threshold(fs.vertices, d);
  for (Index t = 0; t < T; ++t) {
    bool indices_ok = true;
    for (int j = 0; j <= d; ++j) {
      const int v = fs.cells(t, j);
      if (v < 0 || v >= P) {
        indices_ok = false;
        out.push_back({K::kIndexOutOfRange, t,
                       "cell " + std::to_string(t) + " references vertex " + std::to_string(v) +
                           " outside [0, " + std::to_string(P) + ")"});
      }
      for (int i = 0; i < j; ++i) {
        if (fs.cells(t, i) == v) {
          indices_ok = false;
          out.push_back({K::kRepeatedIndex, t,
                         "cell " + std::to_string(t) + " repeats vertex " + std::to_string(v)});
        }
      }
    }
    if (!indices_ok) continue;
    const double vol = detail::simplex_volume(fs.vertices, fs.cells, t);
    if (!(vol >= threshold) || vol == 0.0) {
      std::ostringstream msg;
      msg << "cell " << t << " is degenerate (d-volume " << vol << ")";
      out.push_back({K::kDegenerateCell, t, msg.str()});
    }
  }
  return out;
}

/// Non-fatal topology remarks: repeated cells and edges shared by more than
/// two triangles. These are legal inputs.
inline std::vector<std::string> topology_notes(const Fshape& fs) {
  std::vector<std::string> notes;
  std::set<std::vector<int>> seen;
  for (Index t = 0; t < fs.num_cells(); ++t) {
    std::vector<int> key(fs.cells.row(t).data(), fs.cells.row(t).data() + fs.cells.cols());
    std::sort(key.begin(), key.end());
    if (!seen.insert(key).second) notes.push_back("cell " + std::to_string(t) + " repeats an earlier cell");
  }
  if (fs.cell_dim() == 2) {
    std::vector<std::pair<int, int>> edges;
    for (Index t = 0; t < fs.num_cells(); ++t) {
      for (int j = 0; j < 3; ++j) {
        int a = fs.cells(t, j), b = fs.cells(t, (j + 1) % 3);
        edges.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
    std::sort(edges.begin(), edges.end());
    for (size_t i = 0; i < edges.size();) {
      size_t j = i;
      while (j < edges.size() && edges[j] == edges[i]) ++j;
      if (j - i > 2) {
        notes.push_back("non-manifold edge (" + std::to_string(edges[i].first) + ", " +
                        std::to_string(edges[i].second) + ") shared by " + std::to_string(j - i) + " cells");
      }
      i = j;
    }
  }
  return notes;
}

inline void require_valid(const Fshape& fs) {
  const auto v = validate_fshape(fs);
  if (!v.empty()) throw InvalidInput("invalid fshape: " + v.front().message);
}

/// Per-cell quantities: barycenters, d-volumes, unit frames (normals for
/// triangles, tangents for segments) and mean cell signals.
struct CellGeometry {
  Matrix centers;
  Vector volumes;
  Matrix frames;
  Vector cell_signals;
};

/// Gradient of a scalar with respect to each CellGeometry field.
struct CellGeometryGradient {
  Matrix centers;
  Vector volumes;
  Matrix frames;
  Vector cell_signals;

  static CellGeometryGradient zeros(Index T, Index n) {
    return {Matrix::Zero(T, n), Vector::Zero(T), Matrix::Zero(T, n), Vector::Zero(T)};
  }
};

namespace detail {

inline Eigen::Vector3d cross3(const Eigen::Vector3d& a, const Eigen::Vector3d& b) { return a.cross(b); }

}  // namespace detail

inline CellGeometry cell_geometry(const Matrix& x, const Vector& f, const Cells& cells) {
  const Index T = cells.rows();
  const Index n = x.cols();
  const int d = static_cast<int>(cells.cols()) - 1;
  const double threshold = detail::degeneracy_threshold(x, d);

  CellGeometry g{Matrix(T, n), Vector(T), Matrix(T, n), Vector(T)};
  for (Index t = 0; t < T; ++t) {
    g.centers.row(t).setZero();
    double s = 0.0;
    for (int j = 0; j <= d; ++j) {
      g.centers.row(t) += x.row(cells(t, j));
      s += f[cells(t, j)];
    }
    g.centers.row(t) /= (d + 1);
    g.cell_signals[t] = s / (d + 1);

    if (d == 1) {
      const Eigen::RowVectorXd e = x.row(cells(t, 1)) - x.row(cells(t, 0));
      const double len = e.norm();
      if (!(len >= threshold) || len == 0.0) throw DegenerateCellError(t, len);
      g.volumes[t] = len;
      g.frames.row(t) = e / len;
    } else {
      const Eigen::Vector3d e1 = (x.row(cells(t, 1)) - x.row(cells(t, 0))).transpose();
      const Eigen::Vector3d e2 = (x.row(cells(t, 2)) - x.row(cells(t, 0))).transpose();
      const Eigen::Vector3d N = detail::cross3(e1, e2);
      const double norm = N.norm();
      if (!(0.5 * norm >= threshold) || norm == 0.0) throw DegenerateCellError(t, 0.5 * norm);
      g.volumes[t] = 0.5 * norm;
      g.frames.row(t) = (N / norm).transpose();
    }
  }
  return g;
}

inline CellGeometry cell_geometry(const Fshape& fs) {
  return cell_geometry(fs.vertices, fs.signals, fs.cells);
}

/// Chain rule from cell quantities back to vertex positions and signals.
/// `geom` must be cell_geometry(x, ., cells).
inline std::pair<Matrix, Vector> pullback_cell_gradient(const Matrix& x, const Cells& cells,
                                                        const CellGeometry& geom,
                                                        const CellGeometryGradient& grad) {
  const Index T = cells.rows();
  const int d = static_cast<int>(cells.cols()) - 1;
  Matrix dx = Matrix::Zero(x.rows(), x.cols());
  Vector df = Vector::Zero(x.rows());

  for (Index t = 0; t < T; ++t) {
    for (int j = 0; j <= d; ++j) {
      dx.row(cells(t, j)) += grad.centers.row(t) / (d + 1);
      df[cells(t, j)] += grad.cell_signals[t] / (d + 1);
    }
    const Eigen::RowVectorXd u = geom.frames.row(t);
    const Eigen::RowVectorXd gu = grad.frames.row(t);
    // Frame is unit: only the component of gu orthogonal to u survives.
    const Eigen::RowVectorXd gu_perp = gu - gu.dot(u) * u;
    if (d == 1) {
      const double len = geom.volumes[t];
      const Eigen::RowVectorXd ge = u * grad.volumes[t] + gu_perp / len;
      dx.row(cells(t, 1)) += ge;
      dx.row(cells(t, 0)) -= ge;
    } else {
      // N = e1 x e2, volume = |N|/2, frame = N/|N|.
      const double normN = 2.0 * geom.volumes[t];
      const Eigen::Vector3d gN = (0.5 * grad.volumes[t] * u + gu_perp / normN).transpose();
      const Eigen::Vector3d e1 = (x.row(cells(t, 1)) - x.row(cells(t, 0))).transpose();
      const Eigen::Vector3d e2 = (x.row(cells(t, 2)) - x.row(cells(t, 0))).transpose();
      const Eigen::Vector3d ge1 = e2.cross(gN);
      const Eigen::Vector3d ge2 = gN.cross(e1);
      dx.row(cells(t, 1)) += ge1.transpose();
      dx.row(cells(t, 2)) += ge2.transpose();
      dx.row(cells(t, 0)) -= (ge1 + ge2).transpose();
    }
  }
  return {dx, df};
}

/// The fshape (x1, f + zeta) on the same connectivity.
inline Fshape apply_end_transform(const Fshape& fs, const Matrix& x1, const Vector& zeta) {
  if (x1.rows() != fs.vertices.rows() || x1.cols() != fs.vertices.cols()) {
    throw InvalidInput("apply_end_transform: vertex array shape mismatch");
  }
  if (zeta.size() != fs.signals.size()) throw InvalidInput("apply_end_transform: signal residual length mismatch");
  return Fshape{x1, fs.signals + zeta, fs.cells};
}

/// Total d-volume of the mesh.
inline double total_volume(const Matrix& x, const Cells& cells) {
  double v = 0.0;
  for (Index t = 0; t < cells.rows(); ++t) v += detail::simplex_volume(x, cells, t);
  return v;
}

}  // namespace fshapes
