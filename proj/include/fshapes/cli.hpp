#pragma once

// Command-line front end. Exit codes: 0 success, 1 user error (bad input,
// failed check), 2 internal error. Output directories are built in a sibling
// temporary directory and renamed into place only on success.
//
// Requires OpenSSL (libcrypto) for the input hashes in run manifests.

#include "fshapes/config.hpp"
#include "fshapes/io.hpp"
#include "fshapes/matching.hpp"
#include "fshapes/sphere_oracle.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fshapes {

inline constexpr const char* kVersion = "0.1.0";

namespace cli_detail {

namespace fs = std::filesystem;

inline std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("SHA-256 initialisation failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

/// Sibling temporary directory that is removed unless committed.
class StagingDir {
 public:
  StagingDir(fs::path target, bool force) : target_(std::move(target)) {
    if (fs::exists(target_) && !force) {
      throw InvalidInput("output " + target_.string() + " already exists (use --force to replace it)");
    }
    const fs::path parent = target_.has_parent_path() ? target_.parent_path() : fs::path(".");
    if (!fs::exists(parent)) throw InvalidInput("output parent directory " + parent.string() + " does not exist");
    std::random_device rd;
    for (int attempt = 0; attempt < 100; ++attempt) {
      std::ostringstream name;
      name << '.' << target_.filename().string() << ".tmp-" << std::hex << rd();
      tmp_ = parent / name.str();
      if (fs::create_directory(tmp_)) return;
    }
    throw Error("cannot create a temporary directory next to " + target_.string());
  }
  StagingDir(const StagingDir&) = delete;
  StagingDir& operator=(const StagingDir&) = delete;
  ~StagingDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(tmp_, ec);
    }
  }

  const fs::path& path() const { return tmp_; }

  void commit() {
    if (fs::exists(target_)) fs::remove_all(target_);
    fs::rename(tmp_, target_);
    committed_ = true;
  }

 private:
  fs::path target_;
  fs::path tmp_;
  bool committed_ = false;
};

inline void write_file_atomic(const fs::path& target, const std::string& content) {
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw InvalidInput("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("I/O error while writing " + tmp.string());
  }
  fs::rename(tmp, target);
}

inline Fshape load(const fs::path& p, std::ostream& err) {
  std::vector<std::string> warnings;
  Fshape shape = read_fshape(p, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  return shape;
}

inline MatchConfig load_config(const std::string& path) {
  return path.empty() ? MatchConfig{} : read_match_config(path);
}

class PhaseTimer {
 public:
  void start(const std::string& name) {
    name_ = name;
    t0_ = std::chrono::steady_clock::now();
  }
  void stop() { timings_[name_] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }
  const Json& json() const { return timings_; }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point t0_;
  Json timings_ = Json::object();
};

inline std::string history_csv(const std::vector<HistoryEntry>& history) {
  std::ostringstream out;
  out << std::setprecision(17) << "stage,iteration,objective,energy,fidelity,step\n";
  for (const auto& h : history) {
    out << h.stage << ',' << h.iteration << ',' << h.objective << ',' << h.energy << ',' << h.fidelity << ','
        << h.step << '\n';
  }
  return out.str();
}

inline Json versions() {
  return {{"fshapes", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"compiler", __VERSION__},
          {"cplusplus", __cplusplus}};
}

// Area-weighted random momentum densities used as the gradcheck base point.
inline std::pair<Matrix, Vector> random_momenta(const Fshape& source, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const Vector area = assemble_D0_lumped(source).diagonal();
  Matrix p0 = Matrix::NullaryExpr(source.num_vertices(), source.ambient_dim(), [&] { return normal(rng); });
  Vector pf = Vector::NullaryExpr(source.num_vertices(), [&] { return normal(rng); });
  p0 = amplitude * (p0.array().colwise() * area.array()).matrix();
  pf = amplitude * pf.cwiseProduct(area);
  return {p0, pf};
}

}  // namespace cli_detail

/// Runs the command line; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  using namespace cli_detail;

  CLI::App app{"Registration of functional shapes by geodesic shooting"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string src, tgt, config, out_path, p0_path, pf_path;
  bool force = false;

  auto* validate = app.add_subcommand("validate", "Check a mesh file and list violations");
  validate->add_option("fshape", src, "Mesh file (.fsh, .ply, .off)")->required();

  auto* distance = app.add_subcommand("distance", "Varifold fidelity between two fshapes");
  distance->add_option("source", src)->required();
  distance->add_option("target", tgt)->required();
  distance->add_option("--config", config, "JSON config (fidelity kernels)");

  auto* shoot_cmd = app.add_subcommand("shoot", "Integrate a geodesic from given initial momenta");
  shoot_cmd->add_option("source", src)->required();
  shoot_cmd->add_option("--p0", p0_path, "P x n geometric momentum matrix")->required();
  shoot_cmd->add_option("--pf", pf_path, "P functional momenta, one per line")->required();
  shoot_cmd->add_option("--config", config);
  shoot_cmd->add_option("--out", out_path, "Output directory")->required();
  shoot_cmd->add_flag("--force", force, "Replace an existing output directory");

  auto* match_cmd = app.add_subcommand("match", "Register source onto target");
  match_cmd->add_option("source", src)->required();
  match_cmd->add_option("target", tgt)->required();
  match_cmd->add_option("--config", config);
  match_cmd->add_option("--out", out_path, "Output directory")->required();
  match_cmd->add_flag("--force", force, "Replace an existing output directory");
  bool quiet = false;
  match_cmd->add_flag("--quiet", quiet, "Do not print per-iteration progress");

  SphereState s0{1.0, 0.0, 0.0, 0.0};
  SphereParams sp;
  auto* sphere = app.add_subcommand("sphere-oracle", "Integrate the radius/signal ODEs of a sphere");
  sphere->add_option("--r0", s0.r, "Initial radius")->capture_default_str();
  sphere->add_option("--f0", s0.f, "Initial signal")->capture_default_str();
  sphere->add_option("--rho0", s0.rho, "Initial radial momentum density")->capture_default_str();
  sphere->add_option("--pf", s0.pf, "Functional momentum density")->capture_default_str();
  sphere->add_option("--sigma", sp.sigma, "Gaussian kernel width")->capture_default_str();
  sphere->add_option("--gammaV", sp.gamma_V)->capture_default_str();
  sphere->add_option("--gammaF", sp.gamma_f)->capture_default_str();
  sphere->add_option("--steps", sp.n_steps)->capture_default_str();
  sphere->add_option("--out", out_path, "CSV output (t,r,f,rho,pf); stdout if omitted");

  int directions = 20;
  std::uint64_t seed = 1;
  double amplitude = 1.0;
  auto* gradcheck = app.add_subcommand("gradcheck", "Adjoint gradient against central finite differences");
  gradcheck->add_option("source", src)->required();
  gradcheck->add_option("target", tgt)->required();
  gradcheck->add_option("--config", config);
  gradcheck->add_option("--directions", directions)->capture_default_str();
  gradcheck->add_option("--seed", seed)->capture_default_str();
  gradcheck->add_option("--amplitude", amplitude, "Momentum density amplitude of the base point")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*validate) {
      const Fshape shape = load(src, err);
      const auto violations = validate_fshape(shape);
      for (const auto& v : violations) out << v.message << '\n';
      for (const auto& note : topology_notes(shape)) out << "note: " << note << '\n';
      if (violations.empty()) out << "ok: " << shape.num_vertices() << " vertices, " << shape.num_cells() << " cells\n";
      return violations.empty() ? 0 : 1;
    }

    if (*distance) {
      const MatchConfig cfg = load_config(config);
      const Fshape a = load(src, err), b = load(tgt, err);
      require_valid(a);
      require_valid(b);
      out << std::setprecision(17) << fidelity(a, to_varifold(b), cfg.fidelity_kernels) << '\n';
      return 0;
    }

    if (*shoot_cmd) {
      const MatchConfig cfg = load_config(config);
      const Fshape source = load(src, err);
      const Matrix p0 = read_matrix(p0_path);
      const Vector pf = read_vector(pf_path);
      const Trajectory traj = shoot(source, p0, pf, cfg);
      StagingDir stage(out_path, force);
      write_trajectory(stage.path() / "trajectory", traj, source.cells, cfg.dynamics());
      write_fsh(stage.path() / "final.fsh", Fshape{traj.back().x, traj.back().f, source.cells});
      stage.commit();
      return 0;
    }

    if (*match_cmd) {
      PhaseTimer timer;
      timer.start("read");
      const MatchConfig cfg = load_config(config);
      const Fshape source = load(src, err), target = load(tgt, err);
      timer.stop();
      StagingDir stage(out_path, force);
      timer.start("match");
      const MatchObserver progress = [&](const HistoryEntry& h) {
        if (!quiet) {
          err << "stage " << h.stage << " iter " << h.iteration << " J " << std::setprecision(10) << h.objective
              << " energy " << h.energy << " fidelity " << h.fidelity << '\n';
        }
      };
      const MatchResult result = match(source, target, cfg, progress);
      timer.stop();
      timer.start("write");
      const fs::path dir = stage.path();
      write_matrix(dir / "p0.txt", result.p0);
      write_vector(dir / "pf.txt", result.pf);
      write_trajectory(dir / "trajectory", result.trajectory, source.cells, cfg.dynamics());
      write_fsh(dir / "final.fsh", Fshape{result.trajectory.back().x, result.trajectory.back().f, source.cells});
      write_file_atomic(dir / "history.csv", history_csv(result.history));
      timer.stop();
      Json history = Json::array();
      for (const auto& h : result.history) {
        history.push_back({{"stage", h.stage},
                           {"iteration", h.iteration},
                           {"objective", h.objective},
                           {"energy", h.energy},
                           {"fidelity", h.fidelity},
                           {"step", h.step}});
      }
      const Json manifest = {
          {"manifest_version", 1},
          {"config", to_json(cfg)},
          {"inputs",
           {{"source", {{"path", src}, {"sha256", sha256_file(src)}}},
            {"target", {{"path", tgt}, {"sha256", sha256_file(tgt)}}}}},
          {"versions", versions()},
          {"timings_seconds", timer.json()},
          {"converged", result.converged},
          {"reason", result.reason},
          {"objective_history", history},
      };
      write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
      stage.commit();
      out << "finished: " << result.reason << ", J = " << std::setprecision(10)
          << (result.history.empty() ? 0.0 : result.history.back().objective) << '\n';
      return 0;
    }

    if (*sphere) {
      const auto path = integrate_sphere(s0, sp);
      std::ostringstream csv;
      csv << std::setprecision(17) << "t,r,f,rho,pf\n";
      for (size_t k = 0; k < path.size(); ++k) {
        csv << static_cast<double>(k) / sp.n_steps << ',' << path[k].r << ',' << path[k].f << ',' << path[k].rho
            << ',' << path[k].pf << '\n';
      }
      if (out_path.empty()) {
        out << csv.str();
      } else {
        write_file_atomic(out_path, csv.str());
      }
      return 0;
    }

    if (*gradcheck) {
      const MatchConfig cfg = load_config(config);
      const Fshape source = load(src, err), target = load(tgt, err);
      const ShootingProblem problem = make_problem(source, target, cfg, cfg.schedule.back());
      const auto [p0, pf] = random_momenta(source, amplitude, seed);
      const GradientCheckResult r = gradient_check(p0, pf, problem, directions, seed + 1);
      out << std::setprecision(6);
      for (size_t i = 0; i < r.relative_errors.size(); ++i) out << "direction " << i << ": " << r.relative_errors[i] << '\n';
      out << "max relative error: " << r.max_relative_error << '\n';
      return r.max_relative_error < 1e-4 ? 0 : 1;
    }
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace fshapes
