#pragma once

// Mesh and trajectory file formats.
//   .fsh  native text: "fshape d n P T", P lines "coords... signal", T lines of
//         0-based cell indices ('#' starts a comment)
//   .ply  ASCII PLY with an optional per-vertex "signal" property
//   .off  OFF triangles with the signal in a sidecar "<stem>.signal" file
// Doubles are written with 17 significant digits so text round trips are exact.

#include "fshapes/dynamics.hpp"
#include "fshapes/fshape.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace fshapes {

class ParseError : public InvalidInput {
 public:
  ParseError(const std::filesystem::path& file, int line, const std::string& what)
      : InvalidInput(file.string() + ":" + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

namespace detail {

// Line reader that skips blank lines and '#' comments and tracks line numbers.
class LineReader {
 public:
  LineReader(const std::filesystem::path& path, bool allow_comments = true)
      : path_(path), in_(path), comments_(allow_comments) {
    if (!in_) throw InvalidInput("cannot open " + path.string());
  }

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++lineno_;
      if (comments_) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
      }
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  }

  std::string require(const char* what) {
    std::string line;
    if (!next(line)) fail(std::string("unexpected end of file while reading ") + what);
    return line;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_, lineno_, what); }
  int line() const { return lineno_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  bool comments_;
  int lineno_ = 0;
};

template <class T>
std::vector<T> parse_numbers(const std::string& line, const LineReader& rd) {
  std::istringstream ss(line);
  std::vector<T> out;
  std::string tok;
  while (ss >> tok) {
    try {
      size_t used = 0;
      if constexpr (std::is_integral_v<T>) {
        const long long v = std::stoll(tok, &used);
        out.push_back(static_cast<T>(v));
      } else {
        out.push_back(std::stod(tok, &used));
      }
      if (used != tok.size()) rd.fail("malformed number '" + tok + "'");
    } catch (const std::logic_error&) {
      rd.fail("malformed number '" + tok + "'");
    }
  }
  return out;
}

inline std::string lower_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

inline void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error("I/O error while writing " + path.string());
}

}  // namespace detail

inline Fshape read_fsh(const std::filesystem::path& path) {
  detail::LineReader rd(path);
  std::istringstream header(rd.require("header"));
  std::string magic;
  long long d = 0, n = 0, P = 0, T = 0;
  if (!(header >> magic >> d >> n >> P >> T) || magic != "fshape") {
    rd.fail("expected header 'fshape d n P T'");
  }
  if (d < 1 || d > 2 || n < 2 || n > 3 || P < 0 || T < 0) rd.fail("header values out of range");
  Fshape fs;
  fs.vertices.resize(P, n);
  fs.signals.resize(P);
  fs.cells.resize(T, d + 1);
  for (long long k = 0; k < P; ++k) {
    const auto v = detail::parse_numbers<double>(rd.require("vertex"), rd);
    if (static_cast<long long>(v.size()) != n + 1) {
      rd.fail("vertex line needs " + std::to_string(n + 1) + " values (coordinates and signal)");
    }
    for (long long j = 0; j < n; ++j) fs.vertices(k, j) = v[j];
    fs.signals[k] = v[n];
  }
  for (long long t = 0; t < T; ++t) {
    const auto c = detail::parse_numbers<long long>(rd.require("cell"), rd);
    if (static_cast<long long>(c.size()) != d + 1) rd.fail("cell line needs " + std::to_string(d + 1) + " indices");
    for (long long j = 0; j <= d; ++j) {
      if (c[j] < 0 || c[j] >= P) rd.fail("cell index " + std::to_string(c[j]) + " out of range");
      fs.cells(t, j) = static_cast<int>(c[j]);
    }
  }
  std::string extra;
  if (rd.next(extra)) rd.fail("unexpected trailing content");
  return fs;
}

inline void write_fsh(const std::filesystem::path& path, const Fshape& fs) {
  auto out = detail::open_output(path);
  out << "fshape " << fs.cell_dim() << ' ' << fs.ambient_dim() << ' ' << fs.num_vertices() << ' ' << fs.num_cells()
      << '\n';
  for (Index k = 0; k < fs.num_vertices(); ++k) {
    for (Index j = 0; j < fs.vertices.cols(); ++j) out << fs.vertices(k, j) << ' ';
    out << fs.signals[k] << '\n';
  }
  for (Index t = 0; t < fs.num_cells(); ++t) {
    for (Index j = 0; j < fs.cells.cols(); ++j) out << (j ? " " : "") << fs.cells(t, j);
    out << '\n';
  }
  detail::finish_output(out, path);
}

inline Fshape read_ply(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr) {
  detail::LineReader rd(path, false);
  if (rd.require("magic") .rfind("ply", 0) != 0) rd.fail("missing 'ply' magic");
  struct Element {
    std::string name;
    long long count = 0;
    std::vector<std::string> props;
    bool list = false;
  };
  std::vector<Element> elements;
  for (;;) {
    std::istringstream ss(rd.require("header"));
    std::string kw;
    ss >> kw;
    if (kw == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "ascii") rd.fail("only ASCII PLY is supported (got '" + fmt + "')");
    } else if (kw == "element") {
      Element e;
      ss >> e.name >> e.count;
      elements.push_back(e);
    } else if (kw == "property") {
      if (elements.empty()) rd.fail("property before any element");
      std::string type, name;
      ss >> type;
      if (type == "list") {
        std::string ct, it;
        ss >> ct >> it >> name;
        elements.back().list = true;
      } else {
        ss >> name;
      }
      elements.back().props.push_back(name);
    } else if (kw == "end_header") {
      break;
    } else if (kw != "comment" && kw != "obj_info") {
      rd.fail("unknown header keyword '" + kw + "'");
    }
  }
  Fshape fs;
  std::vector<std::vector<int>> cells;
  int cell_size = 0;
  bool have_vertices = false;
  for (const Element& e : elements) {
    if (e.name == "vertex") {
      auto col = [&](const char* nm) {
        const auto it = std::find(e.props.begin(), e.props.end(), nm);
        return it == e.props.end() ? -1 : static_cast<int>(it - e.props.begin());
      };
      const int ix = col("x"), iy = col("y"), iz = col("z"), is = col("signal");
      if (ix < 0 || iy < 0 || iz < 0) rd.fail("vertex element must have x, y, z properties");
      if (is < 0 && warnings) warnings->push_back(path.string() + ": no 'signal' vertex property; signals set to 0");
      fs.vertices.resize(e.count, 3);
      fs.signals = Vector::Zero(e.count);
      for (long long k = 0; k < e.count; ++k) {
        const auto v = detail::parse_numbers<double>(rd.require("vertex"), rd);
        if (v.size() != e.props.size()) rd.fail("vertex line has the wrong number of values");
        fs.vertices.row(k) << v[ix], v[iy], v[iz];
        if (is >= 0) fs.signals[k] = v[is];
      }
      have_vertices = true;
    } else if (e.name == "face" || e.name == "edge") {
      for (long long t = 0; t < e.count; ++t) {
        const auto v = detail::parse_numbers<long long>(rd.require(e.name.c_str()), rd);
        std::vector<int> c;
        if (e.name == "face") {
          if (v.empty() || v[0] != 3 || v.size() != 4) rd.fail("only triangular faces are supported");
          c = {static_cast<int>(v[1]), static_cast<int>(v[2]), static_cast<int>(v[3])};
        } else {
          if (v.size() < 2) rd.fail("edge needs two vertex indices");
          c = {static_cast<int>(v[0]), static_cast<int>(v[1])};
        }
        if (cell_size && cell_size != static_cast<int>(c.size())) rd.fail("mixed faces and edges are not supported");
        cell_size = static_cast<int>(c.size());
        cells.push_back(c);
      }
    } else {
      for (long long t = 0; t < e.count; ++t) rd.require(e.name.c_str());  // skipped element
    }
  }
  if (!have_vertices) rd.fail("no vertex element");
  fs.cells.resize(static_cast<Index>(cells.size()), std::max(cell_size, 3));
  for (size_t t = 0; t < cells.size(); ++t) {
    for (int j = 0; j < cell_size; ++j) {
      if (cells[t][j] < 0 || cells[t][j] >= fs.vertices.rows()) rd.fail("cell index out of range");
      fs.cells(static_cast<Index>(t), j) = cells[t][j];
    }
  }
  return fs;
}

inline void write_ply(const std::filesystem::path& path, const Fshape& fs) {
  if (fs.ambient_dim() != 3) throw InvalidInput("PLY output requires 3-D vertices");
  auto out = detail::open_output(path);
  const bool faces = fs.cell_dim() == 2;
  out << "ply\nformat ascii 1.0\nelement vertex " << fs.num_vertices()
      << "\nproperty double x\nproperty double y\nproperty double z\nproperty double signal\n";
  if (faces) {
    out << "element face " << fs.num_cells() << "\nproperty list uchar int vertex_indices\n";
  } else {
    out << "element edge " << fs.num_cells() << "\nproperty int vertex1\nproperty int vertex2\n";
  }
  out << "end_header\n";
  for (Index k = 0; k < fs.num_vertices(); ++k) {
    out << fs.vertices(k, 0) << ' ' << fs.vertices(k, 1) << ' ' << fs.vertices(k, 2) << ' ' << fs.signals[k] << '\n';
  }
  for (Index t = 0; t < fs.num_cells(); ++t) {
    if (faces) out << "3 ";
    for (Index j = 0; j < fs.cells.cols(); ++j) out << (j ? " " : "") << fs.cells(t, j);
    out << '\n';
  }
  detail::finish_output(out, path);
}

inline std::filesystem::path signal_sidecar(const std::filesystem::path& off_path) {
  auto p = off_path;
  p.replace_extension(".signal");
  return p;
}

inline Fshape read_off(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr) {
  detail::LineReader rd(path);
  std::string first = rd.require("header");
  first.erase(0, first.find_first_not_of(" \t"));
  if (first.rfind("OFF", 0) != 0) rd.fail("missing 'OFF' header");
  std::string counts_line = first.substr(3);
  if (counts_line.find_first_not_of(" \t\r") == std::string::npos) counts_line = rd.require("counts");
  const auto counts = detail::parse_numbers<long long>(counts_line, rd);
  if (counts.size() < 2) rd.fail("expected vertex and face counts");
  const long long P = counts[0], T = counts[1];
  Fshape fs;
  fs.vertices.resize(P, 3);
  for (long long k = 0; k < P; ++k) {
    const auto v = detail::parse_numbers<double>(rd.require("vertex"), rd);
    if (v.size() < 3) rd.fail("vertex needs three coordinates");
    fs.vertices.row(k) << v[0], v[1], v[2];
  }
  fs.cells.resize(T, 3);
  long long min_index = P, max_index = -1;
  std::vector<int> face_lines(T);
  for (long long t = 0; t < T; ++t) {
    const auto c = detail::parse_numbers<long long>(rd.require("face"), rd);
    if (c.empty() || c[0] != 3 || c.size() < 4) rd.fail("only triangular faces are supported");
    for (int j = 0; j < 3; ++j) {
      min_index = std::min(min_index, c[j + 1]);
      max_index = std::max(max_index, c[j + 1]);
      fs.cells(t, j) = static_cast<int>(c[j + 1]);
    }
    face_lines[t] = rd.line();
  }
  if (T > 0 && max_index == P && min_index >= 1) {
    rd.fail("face indices run from 1 to " + std::to_string(P) + "; OFF indices are 0-based (file looks 1-based)");
  }
  for (long long t = 0; t < T; ++t) {
    for (int j = 0; j < 3; ++j) {
      if (fs.cells(t, j) < 0 || fs.cells(t, j) >= P) {
        throw ParseError(path, face_lines[t], "face index " + std::to_string(fs.cells(t, j)) + " out of range");
      }
    }
  }

  const auto side = signal_sidecar(path);
  fs.signals = Vector::Zero(P);
  if (std::filesystem::exists(side)) {
    detail::LineReader srd(side);
    std::vector<double> vals;
    std::string line;
    while (srd.next(line)) {
      const auto v = detail::parse_numbers<double>(line, srd);
      vals.insert(vals.end(), v.begin(), v.end());
    }
    if (static_cast<long long>(vals.size()) != P) {
      throw InvalidInput(side.string() + ": " + std::to_string(vals.size()) + " signal values for " +
                         std::to_string(P) + " vertices");
    }
    for (long long k = 0; k < P; ++k) fs.signals[k] = vals[k];
  } else if (warnings) {
    warnings->push_back(path.string() + ": no sidecar " + side.string() + "; signals set to 0");
  }
  return fs;
}

inline void write_off(const std::filesystem::path& path, const Fshape& fs) {
  if (fs.ambient_dim() != 3 || fs.cell_dim() != 2) throw InvalidInput("OFF output requires a 3-D triangle mesh");
  {
    auto out = detail::open_output(path);
    out << "OFF\n" << fs.num_vertices() << ' ' << fs.num_cells() << " 0\n";
    for (Index k = 0; k < fs.num_vertices(); ++k) {
      out << fs.vertices(k, 0) << ' ' << fs.vertices(k, 1) << ' ' << fs.vertices(k, 2) << '\n';
    }
    for (Index t = 0; t < fs.num_cells(); ++t) {
      out << "3 " << fs.cells(t, 0) << ' ' << fs.cells(t, 1) << ' ' << fs.cells(t, 2) << '\n';
    }
    detail::finish_output(out, path);
  }
  const auto side = signal_sidecar(path);
  auto out = detail::open_output(side);
  for (Index k = 0; k < fs.num_vertices(); ++k) out << fs.signals[k] << '\n';
  detail::finish_output(out, side);
}

/// Reads a mesh, choosing the format from the file extension.
inline Fshape read_fshape(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr) {
  if (!std::filesystem::exists(path)) throw InvalidInput("no such file: " + path.string());
  const std::string ext = detail::lower_extension(path);
  if (ext == ".fsh") return read_fsh(path);
  if (ext == ".ply") return read_ply(path, warnings);
  if (ext == ".off") return read_off(path, warnings);
  throw InvalidInput("unsupported mesh extension '" + ext + "' (expected .fsh, .ply or .off)");
}

inline void write_fshape(const std::filesystem::path& path, const Fshape& fs) {
  const std::string ext = detail::lower_extension(path);
  if (ext == ".fsh") return write_fsh(path, fs);
  if (ext == ".ply") return write_ply(path, fs);
  if (ext == ".off") return write_off(path, fs);
  if (ext == ".vtk") throw InvalidInput("use write_vtk for VTK output");
  throw InvalidInput("unsupported mesh extension '" + ext + "'");
}

/// Legacy ASCII VTK PolyData with the signal as point scalars.
inline void write_vtk(const std::filesystem::path& path, const Matrix& x, const Vector& f, const Cells& cells,
                      const std::string& title = "fshape") {
  auto out = detail::open_output(path);
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET POLYDATA\n";
  out << "POINTS " << x.rows() << " double\n";
  for (Index k = 0; k < x.rows(); ++k) {
    out << x(k, 0) << ' ' << x(k, 1) << ' ' << (x.cols() > 2 ? x(k, 2) : 0.0) << '\n';
  }
  const Index T = cells.rows();
  const Index per = cells.cols();
  out << (per == 2 ? "LINES " : "POLYGONS ") << T << ' ' << T * (per + 1) << '\n';
  for (Index t = 0; t < T; ++t) {
    out << per;
    for (Index j = 0; j < per; ++j) out << ' ' << cells(t, j);
    out << '\n';
  }
  out << "POINT_DATA " << x.rows() << "\nSCALARS signal double 1\nLOOKUP_TABLE default\n";
  for (Index k = 0; k < x.rows(); ++k) out << f[k] << '\n';
  detail::finish_output(out, path);
}

/// Whitespace-separated numeric matrix, one row per line.
inline Matrix read_matrix(const std::filesystem::path& path) {
  detail::LineReader rd(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (rd.next(line)) {
    rows.push_back(detail::parse_numbers<double>(line, rd));
    if (rows.back().size() != rows.front().size()) rd.fail("ragged matrix row");
  }
  Matrix m(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows.front().size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

inline void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  auto out = detail::open_output(path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
    out << '\n';
  }
  detail::finish_output(out, path);
}

inline Vector read_vector(const std::filesystem::path& path) {
  const Matrix m = read_matrix(path);
  if (m.cols() > 1) throw InvalidInput(path.string() + ": expected one value per line");
  return m.size() ? Vector(Eigen::Map<const Vector>(m.data(), m.rows())) : Vector();
}

inline void write_vector(const std::filesystem::path& path, const Vector& v) {
  write_matrix(path, Matrix(Eigen::Map<const Matrix>(v.data(), v.size(), 1)));
}

/// One VTK file per trajectory sample plus index.csv with
/// t, H_r, total volume, min and max signal.
inline void write_trajectory(const std::filesystem::path& dir, const Trajectory& traj, const Cells& cells,
                             const DynamicsConfig& cfg) {
  std::filesystem::create_directories(dir);
  const int N = traj.n_steps();
  const auto index_path = dir / "index.csv";
  auto csv = detail::open_output(index_path);
  csv << "t,H_r,volume,min_signal,max_signal,file\n";
  for (int k = 0; k <= N; ++k) {
    const ShootingState& s = traj.states[k];
    std::ostringstream name;
    name << "step_" << std::setw(4) << std::setfill('0') << k << ".vtk";
    write_vtk(dir / name.str(), s.x, s.f, cells, "fshape t=" + std::to_string(static_cast<double>(k) / N));
    csv << static_cast<double>(k) / N << ',' << reduced_hamiltonian(s, cells, cfg) << ',' << total_volume(s.x, cells)
        << ',' << s.f.minCoeff() << ',' << s.f.maxCoeff() << ',' << name.str() << '\n';
  }
  detail::finish_output(csv, index_path);
}

}  // namespace fshapes
