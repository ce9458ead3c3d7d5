// Identify drift and diffusion of the double-well SDE from one trajectory.
#include <iostream>

#include <sde_sindy/dictionary.hpp>
#include <sde_sindy/estimators.hpp>
#include <sde_sindy/metrics.hpp>
#include <sde_sindy/sde_sim.hpp>
#include <sde_sindy/sparse.hpp>

int main() {
  using namespace sde_sindy;
  const SdeModel model = model_zoo(ZooModel::double_well);
  const double sim_dt = 2e-4, dt = 2e-3, T = 2000.0;

  Vector x0(1);
  x0 << 0.5;
  const Trajectory fine = euler_maruyama(model, x0, sim_dt, static_cast<std::size_t>(T / sim_dt), 7);
  const Trajectory traj = subsample(fine, static_cast<std::size_t>(dt / sim_dt + 0.5));

  const Dictionary dict = monomial_dictionary(1, 5);
  const DesignSet ds = build_design_set(dict, traj, 1);
  SystemAssembler assembler(ds);

  const Matrix alpha = solve_system(assembler.drift_trapezoidal(), {SolverKind::stls, 0.005});
  const Matrix beta = solve_system(assembler.diffusion_trapezoidal(alpha), {SolverKind::stls, 0.001});
  const TrueCoefficients truth = true_coefficients(model, dict);

  std::cout << "term\tdrift\ttrue\tdiffusion\ttrue\n";
  for (Eigen::Index i = 0; i < dict.size(); ++i) {
    std::cout << dict.labels()[static_cast<std::size_t>(i)] << '\t' << alpha(i, 0) << '\t' << truth.drift(i, 0) << '\t'
              << beta(i, 0) << '\t' << truth.diffusion(i, 0) << '\n';
  }
}
