#pragma once

// Test and demo meshes: icospheres, triangulated rectangles, polylines and
// 4-fold midpoint subdivision.

#include "fshapes/fshape.hpp"

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

namespace fshapes {

/// Triangulated sphere by repeated midpoint subdivision of an icosahedron,
/// with outward-oriented triangles. Level L has 10 * 4^L + 2 vertices
/// (level 3 -> 642, level 4 -> 2562).
inline Fshape icosphere(int level, double radius = 1.0, double signal = 0.0) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                                    {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<std::array<int, 3>> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                       {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                       {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                       {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(4 * f.size());
    for (const auto& tri : f) {
      const int a = midpoint(tri[0], tri[1]);
      const int b = midpoint(tri[1], tri[2]);
      const int c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  Fshape fs;
  fs.vertices.resize(static_cast<Index>(v.size()), 3);
  for (size_t i = 0; i < v.size(); ++i) fs.vertices.row(static_cast<Index>(i)) = radius * v[i].transpose();
  fs.signals = Vector::Constant(static_cast<Index>(v.size()), signal);
  fs.cells.resize(static_cast<Index>(f.size()), 3);
  for (size_t i = 0; i < f.size(); ++i) {
    for (int j = 0; j < 3; ++j) fs.cells(static_cast<Index>(i), j) = f[i][j];
  }
  return fs;
}

/// nx x ny vertex grid over [x0, x1] x [y0, y1] in the z = 0 plane, each quad
/// split into two triangles. Signals are zero.
inline Fshape grid_rectangle(int nx, int ny, double x0 = -1.0, double x1 = 1.0, double y0 = -1.0, double y1 = 1.0) {
  Fshape fs;
  fs.vertices.resize(static_cast<Index>(nx) * ny, 3);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      fs.vertices.row(j * nx + i) << x0 + (x1 - x0) * i / (nx - 1), y0 + (y1 - y0) * j / (ny - 1), 0.0;
    }
  }
  fs.signals = Vector::Zero(fs.vertices.rows());
  fs.cells.resize(2 * static_cast<Index>(nx - 1) * (ny - 1), 3);
  Index t = 0;
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const int a = j * nx + i, b = a + 1, c = a + nx, d = c + 1;
      fs.cells.row(t++) << a, b, d;
      fs.cells.row(t++) << a, d, c;
    }
  }
  return fs;
}

/// Open polyline through the rows of `points` (d = 1).
inline Fshape polyline(const Matrix& points, const Vector& signals) {
  Fshape fs{points, signals, Cells(points.rows() - 1, 2)};
  for (Index k = 0; k + 1 < points.rows(); ++k) fs.cells.row(k) << static_cast<int>(k), static_cast<int>(k + 1);
  return fs;
}

/// Splits every triangle into four (every segment into two) through edge
/// midpoints; new vertex signals are linear interpolants.
inline Fshape subdivide(const Fshape& fs) {
  const int d = fs.cell_dim();
  std::vector<Eigen::RowVectorXd> verts;
  std::vector<double> sig;
  for (Index k = 0; k < fs.num_vertices(); ++k) {
    verts.emplace_back(fs.vertices.row(k));
    sig.push_back(fs.signals[k]);
  }
  std::map<std::pair<int, int>, int> mid;
  auto midpoint = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    verts.emplace_back(0.5 * (fs.vertices.row(a) + fs.vertices.row(b)));
    sig.push_back(0.5 * (fs.signals[a] + fs.signals[b]));
    const int id = static_cast<int>(verts.size()) - 1;
    mid.emplace(key, id);
    return id;
  };
  std::vector<std::vector<int>> cells;
  for (Index t = 0; t < fs.num_cells(); ++t) {
    if (d == 1) {
      const int a = fs.cells(t, 0), b = fs.cells(t, 1), m = midpoint(a, b);
      cells.push_back({a, m});
      cells.push_back({m, b});
    } else {
      const int p = fs.cells(t, 0), q = fs.cells(t, 1), r = fs.cells(t, 2);
      const int a = midpoint(p, q), b = midpoint(q, r), c = midpoint(r, p);
      cells.push_back({p, a, c});
      cells.push_back({q, b, a});
      cells.push_back({r, c, b});
      cells.push_back({a, b, c});
    }
  }
  Fshape out;
  out.vertices.resize(static_cast<Index>(verts.size()), fs.ambient_dim());
  out.signals.resize(static_cast<Index>(verts.size()));
  for (size_t i = 0; i < verts.size(); ++i) {
    out.vertices.row(static_cast<Index>(i)) = verts[i];
    out.signals[static_cast<Index>(i)] = sig[i];
  }
  out.cells.resize(static_cast<Index>(cells.size()), d + 1);
  for (size_t i = 0; i < cells.size(); ++i) {
    for (int j = 0; j <= d; ++j) out.cells(static_cast<Index>(i), j) = cells[i][j];
  }
  return out;
}

}  // namespace fshapes
