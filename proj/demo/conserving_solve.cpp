// Ten Crank-Nicolson steps of linear KdV, once with plain FGMRES and once with
// constrained GMRES, printing how far each drifts from the initial invariants.

#include <cmath>
#include <cstdio>

#include "spk/problems/lkdv.hpp"
#include "spk/stepping.hpp"

int main() {
  using namespace spk;
  const lkdv::LkdvDiscretisation disc(lkdv::DgMesh1D{40.0, 50, 1});
  const Vector z0 = disc.initial_state([](double x) { return lkdv::travelling_wave(0.0, x); });
  const LinearScheme scheme = disc.crank_nicolson(0.01, z0);
  const auto invariants = scheme.laws(z0);

  for (SolverKind kind : {SolverKind::Fgmres, SolverKind::Cgmres}) {
    SolverConfig config;
    config.kind = kind;
    config.tol = 1e-6;
    Stepper stepper(scheme, config);

    Vector z = z0;
    Index iterations = 0;
    for (int n = 0; n < 10; ++n) {
      StepOutcome out = stepper.step(z);
      iterations += out.report.iterations;
      z = std::move(out.z);
    }
    std::printf("%-7s %3zu iterations |", to_string(kind), iterations);
    for (const auto& g : invariants) std::printf("  %s drift %.2e", g.label().c_str(), std::abs(evaluate(g, z)));
    std::printf("\n");
  }
}
