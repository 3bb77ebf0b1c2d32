// Evaluates the nematic envelope along a ray of diagonal strains and prints
// which region of the piecewise formula each point falls in.

#include <cstdio>

#include "iqclab/envelopes.hpp"

int main() {
    using namespace iqclab;
    const std::array<double, 3> rho{-1.0, 0.0, 1.0};
    std::printf("%8s %14s %14s %7s\n", "t", "V", "V_iqc", "region");
    for (double t : {0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0}) {
        const Matrix<3> z = Matrix<3>::diag({-t, 0.0, t});
        const auto e = nematic_V_iqc_eval(rho, z);
        std::printf("%8.3f %14.8f %14.8f %7d\n", t, nematic_V_unchecked(rho, z), e.value.value(), e.region);
    }
}
