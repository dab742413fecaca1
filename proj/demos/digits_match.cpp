// Registers two flat squares whose signals are Gaussian blobs at different
// places, for a given gamma_V / gamma_f, and writes the geodesic as VTK.
//
//   digits_match [ratio=20] [out=digits_out] [n=20]

#include "fshapes/fshapes.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

using namespace fshapes;

namespace {

Fshape blob_square(int n, double cx, double cy) {
  Fshape s = grid_rectangle(n, n, 0.0, 1.0, 0.0, 1.0);
  for (Index k = 0; k < s.num_vertices(); ++k) {
    const double dx = s.vertices(k, 0) - cx, dy = s.vertices(k, 1) - cy;
    s.signals[k] = std::exp(-(dx * dx + dy * dy) / (2 * 0.12 * 0.12));
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  const double ratio = argc > 1 ? std::atof(argv[1]) : 20.0;
  const std::string out = argc > 2 ? argv[2] : "digits_out";
  const int n = argc > 3 ? std::atoi(argv[3]) : 20;

  const Fshape src = blob_square(n, 0.35, 0.4), tgt = blob_square(n, 0.62, 0.58);
  MatchConfig cfg = MatchConfig::digits_preset();
  cfg.gamma_V = 1.0;
  cfg.gamma_f = 1.0 / ratio;
  cfg.n_steps = 10;
  cfg.schedule = {{2.0, 1.0, 40}, {1.0, 1.0, 40}};
  const DiscreteVarifold nu = to_varifold(tgt);
  cfg.gamma_W = 1.0 / fvar_inner(nu, nu, cfg.fidelity_kernels);

  const MatchResult r = match(src, tgt, cfg, [](const HistoryEntry& h) {
    if (h.iteration % 10 == 0) std::printf("stage %d iter %3d  J %.6g  fidelity %.6g\n", h.stage, h.iteration, h.objective, h.fidelity);
  });
  const ShootingState& end = r.trajectory.back();
  const double change = std::sqrt(quadratic_form(assemble_D0_lumped(src), end.f - src.signals));
  const double displacement = (end.x - src.vertices).rowwise().norm().maxCoeff();
  std::printf("%s\nsignal change |f1 - f0|_D0 = %.6g, max displacement = %.6g\n", r.reason.c_str(), change,
              displacement);
  write_trajectory(out, r.trajectory, src.cells, cfg.dynamics());
  write_vtk(std::string(out) + "/target.vtk", tgt.vertices, tgt.signals, tgt.cells, "target");
  std::printf("trajectory written to %s/\n", out.c_str());
  return 0;
}
