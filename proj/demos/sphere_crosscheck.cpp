// Shoots an icosphere with uniform radial and signal momenta and prints the
// mean radius and signal next to the radial ODE solution.
//
//   sphere_crosscheck [level=3] [r0=1] [steps=20]

#include "fshapes/fshapes.hpp"

#include <cstdio>
#include <cstdlib>

using namespace fshapes;

int main(int argc, char** argv) {
  const int level = argc > 1 ? std::atoi(argv[1]) : 3;
  const double r0 = argc > 2 ? std::atof(argv[2]) : 1.0;
  const int steps = argc > 3 ? std::atoi(argv[3]) : 20;
  constexpr double gamma_V = 1.0, gamma_f = 5.0, sigma = 0.3, rho = -0.25, pf = -0.6;

  const Fshape sphere = icosphere(level, r0, 0.0);
  const auto [p0, pfv] = sphere_mesh_momenta(sphere, r0, rho, pf);
  DynamicsConfig cfg;
  cfg.gamma_V = gamma_V;
  cfg.gamma_f = gamma_f;
  cfg.kernel = RadialKernelSpec::gaussian(sigma);
  cfg.n_steps = steps;
  const Trajectory mesh = integrate_forward(initial_state(sphere, p0, pfv), sphere.cells, cfg);
  const auto oracle = integrate_sphere({r0, 0.0, rho, pf}, SphereParams::for_mesh(gamma_V, gamma_f, sigma, steps));

  std::printf("%zd vertices\n%6s %12s %12s %12s %12s\n", static_cast<ssize_t>(sphere.num_vertices()), "t", "r mesh",
              "r ode", "f mesh", "f ode");
  for (int k = 0; k <= steps; ++k) {
    const auto [r, f] = sphere_mesh_summary(mesh.states[k].x, mesh.states[k].f);
    std::printf("%6.3f %12.8f %12.8f %12.8f %12.8f\n", static_cast<double>(k) / steps, r, oracle[k].r, f,
                oracle[k].f);
  }
  return 0;
}
