#include <cstdio>

#include "cornerbie/cornerbie.hpp"

using namespace cornerbie;

int main() {
    const Polygon square = build_polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    const double L = square.perimeter;
    const auto u = [L](double s) { return std::cos(2.0 * M_PI * s / L); };

    const double sr = 2.0000000001264535;
    const double sc = 2.0;
    const double pc = square.corner_params[2];
    const double a = std::abs(square.wrapped_difference(sr, sc));
    std::printf("a = %.17g, pc = %g\n", a, pc);

    int evals = 0;
    try {
        const AdaptiveResult res = adaptive_integrate(
            [&](double t) {
                ++evals;
                const double b = std::abs(square.wrapped_difference(t, sc));
                return corner_kernel(pc, a, b) * u(square.reduce_arclength(t));
            },
            1.0, 2.0, 2.5e-13);
        std::printf("value %.15g est %.2e sub %d evals %d\n", res.value, res.error_estimate,
                    res.subdivisions, evals);
    } catch (const Error& e) {
        std::printf("THREW after %d evals: %s\n", evals, e.what());
    }
    return 0;
}
