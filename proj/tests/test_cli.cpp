#include "fshapes/cli.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace fshapes;
namespace fs = std::filesystem;

namespace {

const fs::path kData = FSHAPES_DATA_DIR;

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fshape");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("fshapes_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Quick settings for the match runs below.
fs::path small_config() {
  const fs::path p = workdir() / "small.json";
  Json j = Json::parse(slurp(kData / "fixture10_config.json"));
  j["schedule"] = Json::array({{{"scale_p", 1.0}, {"scale_f", 1.0}, {"iters", 5}}});
  j["n_steps"] = 8;
  std::ofstream(p) << j.dump();
  return p;
}

}  // namespace

TEST(Cli, ValidateExitCodes) {
  const CliRun ok = cli({"validate", (kData / "fixture10_source.fsh").string()});
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_NE(ok.out.find("ok: 10 vertices"), std::string::npos);

  const fs::path degenerate = workdir() / "degenerate.fsh";
  std::ofstream(degenerate) << "fshape 2 3 3 1\n0 0 0 0\n1 0 0 0\n2 0 0 0\n0 1 2\n";
  EXPECT_EQ(cli({"validate", degenerate.string()}).code, 1);

  const CliRun based = cli({"validate", (kData / "one_based.off").string()});
  EXPECT_EQ(based.code, 1);
  EXPECT_NE(based.err.find("1-based"), std::string::npos);

  EXPECT_EQ(cli({"validate"}).code, 1);
  EXPECT_EQ(cli({"frobnicate"}).code, 1);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST(Cli, DistanceOfShapeToItselfIsZero) {
  const std::string a = (kData / "fixture10_source.fsh").string(), b = (kData / "fixture10_target.fsh").string();
  const CliRun same = cli({"distance", a, a});
  ASSERT_EQ(same.code, 0) << same.err;
  EXPECT_NEAR(std::stod(same.out), 0.0, 1e-12);
  const CliRun diff = cli({"distance", a, b});
  ASSERT_EQ(diff.code, 0) << diff.err;
  EXPECT_GT(std::stod(diff.out), 0.0);
}

TEST(Cli, SphereOracleAtFixedPointIsConstant) {
  const CliRun r = cli({"sphere-oracle", "--r0", "1", "--f0", "0.5", "--rho0", "0", "--pf", "0", "--steps", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(r.out);
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "t,r,f,rho,pf");
  int rows = 0;
  while (std::getline(csv, line)) {
    double t, rr, f, rho, pf;
    char c;
    std::istringstream(line) >> t >> c >> rr >> c >> f >> c >> rho >> c >> pf;
    EXPECT_EQ(rr, 1.0);
    EXPECT_EQ(f, 0.5);
    ++rows;
  }
  EXPECT_EQ(rows, 11);
  EXPECT_EQ(cli({"sphere-oracle", "--r0", "-1"}).code, 1);
}

TEST(Cli, GradcheckOnFixturePasses) {
  const CliRun r = cli({"gradcheck", (kData / "fixture10_source.fsh").string(), (kData / "fixture10_target.fsh").string(),
                     "--config", (kData / "fixture10_config.json").string(), "--directions", "6"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("max relative error"), std::string::npos);
}

TEST(Cli, MatchingAShapeToItselfLeavesItInPlace) {
  const std::string src = (kData / "fixture10_source.fsh").string();
  const fs::path out = workdir() / "self";
  const CliRun r = cli({"match", src, src, "--config", small_config().string(), "--out", out.string(), "--quiet"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"p0.txt", "pf.txt", "final.fsh", "history.csv", "manifest.json", "trajectory/index.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const Fshape source = read_fshape(src), final_shape = read_fshape(out / "final.fsh");
  const MatchConfig cfg = read_match_config(small_config());
  const DiscreteVarifold nu = to_varifold(source);
  EXPECT_LT(fidelity(final_shape, nu, cfg.fidelity_kernels),
            1e-10 * fvar_inner(nu, nu, cfg.fidelity_kernels));

  const Json manifest = Json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["manifest_version"], 1);
  EXPECT_EQ(manifest["inputs"]["source"]["sha256"].get<std::string>().size(), 64u);
  EXPECT_EQ(manifest["config"], to_json(cfg));
  EXPECT_TRUE(manifest["converged"].get<bool>());

  // Existing output is kept unless --force.
  EXPECT_EQ(cli({"match", src, src, "--config", small_config().string(), "--out", out.string()}).code, 1);
  EXPECT_EQ(cli({"match", src, src, "--config", (out / "manifest.json").string(), "--out", out.string(), "--force",
                 "--quiet"})
                .code,
            0);
}

TEST(Cli, FailedRunLeavesNoPartialOutput) {
  const fs::path out = workdir() / "failed";
  const fs::path curve = workdir() / "curve.fsh";
  write_fshape(curve, fshapes::testing::random_curve(6, 3));
  const CliRun r = cli({"match", (kData / "fixture10_source.fsh").string(), curve.string(), "--out", out.string()});
  EXPECT_NE(r.code, 0);
  EXPECT_FALSE(fs::exists(out));
  for (const auto& e : fs::directory_iterator(workdir())) {
    EXPECT_EQ(e.path().filename().string().find(".failed.tmp"), std::string::npos) << e.path();
  }
  EXPECT_EQ(cli({"match", "missing.fsh", "missing.fsh", "--out", (workdir() / "nothing").string()}).code, 1);
  EXPECT_FALSE(fs::exists(workdir() / "nothing"));
}

TEST(Cli, ShootWritesTrajectory) {
  const std::string src = (kData / "fixture10_source.fsh").string();
  const Fshape source = read_fshape(src);
  const auto [p0, pf] = fshapes::testing::density_momenta(source, 0.5);
  write_matrix(workdir() / "p0.txt", p0);
  write_vector(workdir() / "pf.txt", pf);
  const fs::path out = workdir() / "shot";
  const CliRun r = cli({"shoot", src, "--p0", (workdir() / "p0.txt").string(), "--pf", (workdir() / "pf.txt").string(),
                     "--config", (kData / "fixture10_config.json").string(), "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "trajectory" / "step_0020.vtk"));
  EXPECT_FALSE(fs::exists(out / "trajectory" / "step_0021.vtk"));

  write_matrix(workdir() / "p0_bad.txt", p0.leftCols(2));
  EXPECT_EQ(cli({"shoot", src, "--p0", (workdir() / "p0_bad.txt").string(), "--pf", (workdir() / "pf.txt").string(),
                 "--out", (workdir() / "shot_bad").string()})
                .code,
            1);
}

TEST(Cli, BinaryRunsAreReproducible) {
  const std::string src = (kData / "fixture10_source.fsh").string(), tgt = (kData / "fixture10_target.fsh").string();
  const fs::path a = workdir() / "rep_a", b = workdir() / "rep_b";
  for (const fs::path& out : {a, b}) {
    const std::string cmd = std::string(FSHAPES_CLI_PATH) + " match " + src + " " + tgt + " --config " +
                            small_config().string() + " --quiet --out " + out.string() + " > /dev/null";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
  }
  for (const char* f : {"p0.txt", "pf.txt", "final.fsh", "history.csv", "trajectory/index.csv",
                        "trajectory/step_0008.vtk"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  Json ma = Json::parse(slurp(a / "manifest.json")), mb = Json::parse(slurp(b / "manifest.json"));
  ma.erase("timings_seconds");
  mb.erase("timings_seconds");
  EXPECT_EQ(ma, mb);
}
