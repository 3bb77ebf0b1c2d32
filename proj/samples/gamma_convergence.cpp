// Clamped single-well experiment: nonlinear incompressible energies at
// shrinking eps against the relaxed linear energy.

#include <cstdio>

#include "iqclab/solver.hpp"

int main() {
    using namespace iqclab;
    ExperimentConfig<3> cfg;
    cfg.m = 8;
    cfg.Z_bc = Matrix<3>::diag({0.3, -0.3, 0.0});
    cfg.eps_list = {0.2, 0.1, 0.05, 0.025};
    const auto rep = convergence_experiment(cfg);
    std::printf("E_rel = %.10f\n", rep.relaxed.energy);
    std::printf("%8s %16s %12s %12s\n", "eps", "E_eps", "gap", "det_res");
    for (std::size_t k = 0; k < rep.nonlinear.size(); ++k) {
        const auto& r = rep.nonlinear[k];
        std::printf("%8.4f %16.10f %12.4e %12.3e\n", r.eps, r.energy, rep.gap[k], r.det_residual);
    }
    std::printf("fitted order %.3f\n", rep.order);
}
