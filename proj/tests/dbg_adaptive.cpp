#include <cstdio>

#include "cornerbie/cornerbie.hpp"

using namespace cornerbie;

int main() {
    const Polygon square = build_polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    const double L = square.perimeter;
    const auto u = [L](double s) { return std::cos(2.0 * M_PI * s / L); };

    // mimic oracle_apply_T for obs near corner 1 (s=1) on edge 0
    for (double a : {1e-3, 1e-6, 1e-9, 1e-12, 1e-14}) {
        const double sr = 1.0 - a;
        const int obs_edge = square.edge_of(sr);
        std::printf("a = %.1e (obs edge %d)\n", a, obs_edge);
        for (int e = 0; e < 4; ++e) {
            if (e == obs_edge) continue;
            const double lo = square.corner_arclengths[e];
            const double hi = lo + square.edge_lengths[e];
            const EdgeRelation rel = classify_edges(obs_edge, e, 4);
            if (rel.kind == EdgeRelation::Kind::adjacent) {
                const double sc = square.corner_arclengths[rel.corner];
                const double pc = square.corner_params[rel.corner];
                const double aa = std::abs(square.wrapped_difference(sr, sc));
                try {
                    const AdaptiveResult res = adaptive_integrate(
                        [&](double t) {
                            const double b = std::abs(square.wrapped_difference(t, sc));
                            return corner_kernel(pc, aa, b) * u(square.reduce_arclength(t));
                        },
                        lo, hi, 1e-12 / 4);
                    std::printf("  edge %d (adj c%d, a=%.3e): %.15g  est %.1e  sub %d\n", e,
                                rel.corner, aa, res.value, res.error_estimate, res.subdivisions);
                } catch (const Error& err) {
                    std::printf("  edge %d: THREW %s\n", e, err.what());
                }
            } else {
                const Vec2 x = point_at(square, sr).point;
                const Vec2 n_y = square.edge_normals[e];
                const AdaptiveResult res = adaptive_integrate(
                    [&](double t) {
                        const Vec2 y = point_at(square, t).point;
                        const Vec2 d = y - x;
                        return dot(n_y, d) / (M_PI * dot(d, d)) * u(square.reduce_arclength(t));
                    },
                    lo, hi, 1e-12 / 4);
                std::printf("  edge %d (far): %.15g  est %.1e  sub %d\n", e, res.value,
                            res.error_estimate, res.subdivisions);
            }
        }
    }
    return 0;
}
