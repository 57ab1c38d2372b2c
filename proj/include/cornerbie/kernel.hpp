#pragma once

#include <cmath>
#include <span>
#include <string>

#include "cornerbie/errors.hpp"
#include "cornerbie/geometry.hpp"
#include "cornerbie/mesh.hpp"
#include "cornerbie/quadrature.hpp"

namespace cornerbie {

// Corner-local closed form of the double-layer kernel: target at arclength
// distance a from the corner, source at distance b on the other edge,
// interior angle (1 - p) * pi.
inline double corner_kernel(double p, double a, double b) {
    if (std::abs(p) >= 1.0)
        throw InvalidCornerParam("corner parameter must satisfy |p| < 1, got " + std::to_string(p));
    const double c = std::cos(p * M_PI);
    return std::sin(p * M_PI) / M_PI * a / (a * a + b * b + 2.0 * a * b * c);
}

// k(s, t) = (1/pi) d/dn_t ln|x(t) - x(s)|, i.e. the double-layer kernel with
// the source at t. Identically zero when both points share an edge.
inline double kernel_eval(const Polygon& poly, double s, double t) {
    const double L = poly.perimeter;
    if (std::abs(poly.wrapped_difference(s, t)) < 1e-14 * L)
        throw CoincidentPoints("kernel evaluated at coincident arclengths");
    const BoundarySample src = point_at(poly, t);
    if (src.at_corner || std::abs(src.s - poly.corner_arclengths[src.edge_index]) < 1e-14 * L ||
        std::abs(src.s - poly.corner_arclengths[src.edge_index] - poly.edge_lengths[src.edge_index]) < 1e-14 * L)
        throw CornerSource("source point lies at a corner; normal undefined");
    const BoundarySample obs = point_at(poly, s);
    if (obs.edge_index == src.edge_index) return 0.0;
    const Vec2 d = src.point - obs.point;
    return dot(src.outward_normal, d) / (M_PI * dot(d, d));
}

namespace detail {

inline double point_segment_distance(Vec2 x, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    double u = len2 > 0.0 ? dot(x - a, ab) / len2 : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    return norm(x - (a + u * ab));
}

// Signed angle subtended at x by the directed segment p0 -> p1.
inline double subtended_angle(Vec2 x, Vec2 p0, Vec2 p1) {
    const Vec2 v0 = p0 - x;
    const Vec2 v1 = p1 - x;
    return std::atan2(cross(v0, v1), dot(v0, v1));
}

}  // namespace detail

// Exact integral of the kernel over a straight panel with unit density:
// the subtended angle divided by pi. Collinear observation points give 0.
inline double panel_angle_integral(Vec2 x_obs, const Panel& panel) {
    const double guard = 1e-13 * (panel.width + norm(panel.p_lo - x_obs) + norm(panel.p_hi - x_obs));
    if (detail::point_segment_distance(x_obs, panel.p_lo, panel.p_hi) <= guard)
        throw ObservationOnPanel("observation point lies on the panel");
    return detail::subtended_angle(x_obs, panel.p_lo, panel.p_hi) / M_PI;
}

// T applied to a piecewise-constant density at an off-boundary point.
// Exact up to rounding: each panel contributes its subtended angle.
inline double apply_T_pc(const GradedMesh& mesh, std::span<const double> coeffs, Vec2 x_obs) {
    KahanSum acc;
    for (int j = 0; j < mesh.panel_count(); ++j)
        acc.add(coeffs[j] * panel_angle_integral(x_obs, mesh.panels[j]));
    return acc.value();
}

namespace detail {

// Offset range of a panel from a corner, in arclength distance.
inline std::pair<double, double> panel_offsets(const Polygon& poly, const Panel& panel,
                                               double corner_s) {
    const double b0 = std::abs(poly.wrapped_difference(panel.t_lo, corner_s));
    const double b1 = std::abs(poly.wrapped_difference(panel.t_hi, corner_s));
    return std::minmax(b0, b1);
}

}  // namespace detail

// How the edge of a source panel relates to the observation edge. All
// near-corner arithmetic runs in arclength offsets from the shared corner:
// offsets survive at scales where global plane coordinates have already lost
// every significant bit.
struct EdgeRelation {
    enum class Kind { same, adjacent, separated } kind = Kind::separated;
    int corner = -1;  // shared vertex index when adjacent
};

inline EdgeRelation classify_edges(int e_obs, int e_src, int edge_count) {
    if (e_obs == e_src) return {EdgeRelation::Kind::same, -1};
    if (e_src == (e_obs + 1) % edge_count) return {EdgeRelation::Kind::adjacent, e_src};
    if (e_obs == (e_src + 1) % edge_count) return {EdgeRelation::Kind::adjacent, e_obs};
    return {EdgeRelation::Kind::separated, -1};
}

// Exact integral of the corner kernel over a source offset range [b_lo, b_hi]
// on the other edge, observation at offset a > 0:
//   int k db = (1/pi) [ atan((b + a cos p pi)/(a sin p pi)) ]_{b_lo}^{b_hi}.
inline double corner_panel_integral(double p, double a, double b_lo, double b_hi) {
    if (a == 0.0) return 0.0;
    const double cp = std::cos(p * M_PI);
    const double sp = std::sin(p * M_PI);
    return (std::atan((b_hi + a * cp) / (a * sp)) - std::atan((b_lo + a * cp) / (a * sp))) / M_PI;
}

// Squared plane distance between boundary points at offsets a and b from a
// corner with parameter p, evaluated without leaving offset coordinates.
inline double corner_pair_distance_sq(double p, double a, double b) {
    const double cp = std::cos(p * M_PI);
    return a * a + b * b + 2.0 * a * b * cp;
}

inline double corner_segment_distance(double p, double a, double b_lo, double b_hi) {
    const double cp = std::cos(p * M_PI);
    const double b_star = std::clamp(-a * cp, b_lo, b_hi);
    return std::sqrt(corner_pair_distance_sq(p, a, b_star));
}

// Near-field integral of k(a, .) f over [b_lo, b_hi] in the angle variable
// psi = atan((b + a cos p pi)/(a sin p pi)), in which the kernel measure is
// flat: k db = d(psi)/pi. f receives source offsets b, clamped strictly
// inside the range so rounding never lands an evaluation on an endpoint.
template <class F>
double corner_kernel_weighted_integral(double p, double a, double b_lo, double b_hi, F&& f,
                                       const QuadratureRule& rule) {
    if (a == 0.0) return 0.0;
    const double cp = std::cos(p * M_PI);
    const double sp = std::sin(p * M_PI);
    const double psi0 = std::atan((b_lo + a * cp) / (a * sp));
    const double dpsi = std::atan((b_hi + a * cp) / (a * sp)) - psi0;
    const double margin = 1e-9 * (b_hi - b_lo);
    KahanSum acc;
    for (int k = 0; k < rule.order; ++k) {
        const double b = a * sp * std::tan(psi0 + rule.nodes[k] * dpsi) - a * cp;
        acc.add(rule.weights[k] * f(std::clamp(b, b_lo + margin, b_hi - margin)));
    }
    return acc.value() * dpsi / M_PI;
}

// Same, with the observation point on the boundary at arclength s. Panels on
// the observation edge contribute exactly zero (collinearity); panels on the
// two neighboring edges are integrated in offsets from the shared corner, so
// the result stays accurate for points arbitrarily deep in the grading.
inline double apply_T_pc(const GradedMesh& mesh, std::span<const double> coeffs, double s) {
    const Polygon& poly = mesh.polygon;
    const double sr = poly.reduce_arclength(s);
    const int e_obs = poly.edge_of(sr);
    const int r = poly.corner_count();
    BoundarySample obs;  // resolved lazily for separated edges only
    bool have_point = false;
    KahanSum acc;
    for (int j = 0; j < mesh.panel_count(); ++j) {
        const Panel& pan = mesh.panels[j];
        const EdgeRelation rel = classify_edges(e_obs, pan.edge_index, r);
        if (rel.kind == EdgeRelation::Kind::same) continue;
        if (rel.kind == EdgeRelation::Kind::adjacent) {
            const double sc = poly.corner_arclengths[rel.corner];
            const double a = std::abs(poly.wrapped_difference(sr, sc));
            const auto [b_lo, b_hi] = detail::panel_offsets(poly, pan, sc);
            acc.add(coeffs[j] *
                    corner_panel_integral(poly.corner_params[rel.corner], a, b_lo, b_hi));
        } else {
            if (!have_point) {
                obs = point_at(poly, sr);
                have_point = true;
            }
            acc.add(coeffs[j] * panel_angle_integral(obs.point, pan));
        }
    }
    return acc.value();
}

namespace detail {

// Antiderivative underlying the exact panel-pair integral: with the two
// edge directions meeting at the shared vertex, c = e_P . e_Q, m = |e_P x e_Q|,
//   d/da G(a, b) = atan((b - a c) / (a m)).
inline double pair_antiderivative(double a, double b, double c, double m) {
    if (a == 0.0 && b == 0.0) return 0.0;
    double g = 0.0;
    if (a != 0.0) g += a * std::atan((b - a * c) / (a * m));
    if (b != 0.0) {
        g += 0.5 * m * b * std::log(a * a + b * b - 2.0 * a * b * c);
        g += b * c * std::atan((a - b * c) / (b * m));
    }
    return g;
}

}  // namespace detail

// Exact value of the Galerkin pair integral
//   int_{target} int_{source} k(s, t) dt ds
// for panels on two edges meeting at a polygon vertex. Offsets are signed
// arclength distances from the shared vertex, so corner-touching endpoints
// enter as exact zeros.
inline double panel_pair_integral(const Polygon& poly, const Panel& target, const Panel& source,
                                  int shared_vertex) {
    const double sv = poly.corner_arclengths[shared_vertex];
    const double a0 = poly.wrapped_difference(target.t_lo, sv);
    const double a1 = poly.wrapped_difference(target.t_hi, sv);
    const double b0 = poly.wrapped_difference(source.t_lo, sv);
    const double b1 = poly.wrapped_difference(source.t_hi, sv);
    const Vec2 ep = poly.edge_tangents[target.edge_index];
    const Vec2 eq = poly.edge_tangents[source.edge_index];
    const double c = dot(ep, eq);
    const double sigma = cross(ep, eq);
    const double m = std::abs(sigma);
    const double dd = detail::pair_antiderivative(a1, b1, c, m) -
                      detail::pair_antiderivative(a1, b0, c, m) -
                      detail::pair_antiderivative(a0, b1, c, m) +
                      detail::pair_antiderivative(a0, b0, c, m);
    return -sigma / (M_PI * m) * dd;
}

// Integral of k(x_obs, t) f(t) dt over one panel through the substitution
// phi = atan(xi / d) that turns the kernel into the flat measure d(phi)/pi.
// Accurate for observation points arbitrarily close to the panel as long as
// f is smooth on it.
template <class F>
double kernel_weighted_integral(Vec2 x_obs, const Panel& panel, Vec2 edge_tangent, F&& f,
                                const QuadratureRule& rule) {
    const Vec2 n = rotate_cw(edge_tangent);
    const double d = dot(n, panel.p_lo - x_obs);
    if (d == 0.0) return 0.0;
    const double xi0 = dot(edge_tangent, panel.p_lo - x_obs);
    const double xi1 = dot(edge_tangent, panel.p_hi - x_obs);
    const double phi0 = std::atan(xi0 / d);
    const double phi1 = std::atan(xi1 / d);
    const double dphi = phi1 - phi0;
    const double margin = 1e-9 * panel.width;
    KahanSum acc;
    for (int k = 0; k < rule.order; ++k) {
        const double xi = d * std::tan(phi0 + rule.nodes[k] * dphi);
        const double t = std::clamp(panel.t_lo + (xi - xi0), panel.t_lo + margin,
                                    panel.t_hi - margin);
        acc.add(rule.weights[k] * f(t));
    }
    return acc.value() * dphi / M_PI;
}

}  // namespace cornerbie
