// Flows the unit box along a random smooth solenoidal velocity and reports
// how the Jacobian determinant error falls as the RK4 step count doubles.

#include <cstdio>

#include "iqclab/divfree.hpp"

int main() {
    using namespace iqclab;
    const auto sample = random_solenoidal_sample<3>(16, 2.0, 7);
    const SmoothCurlVelocity<3> v(sample.potential);
    double prev = 0.0;
    std::printf("%6s %14s %8s\n", "steps", "max|det-1|", "ratio");
    for (int steps : {4, 8, 16, 32, 64}) {
        const double r = flow_map(v, 16, 0.1, steps).det_residual;
        if (prev > 0.0)
            std::printf("%6d %14.4e %8.2f\n", steps, r, prev / r);
        else
            std::printf("%6d %14.4e %8s\n", steps, r, "-");
        prev = r;
    }
}
