#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cornerbie/errors.hpp"

namespace cornerbie {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double c, Vec2 a) { return {c * a.x, c * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

// Rotation by -pi/2; maps the tangent of a counterclockwise loop to the
// outward normal.
inline Vec2 rotate_cw(Vec2 a) { return {a.y, -a.x}; }

// A point on the boundary together with the local frame of its edge.
struct BoundarySample {
    double s = 0.0;
    Vec2 point;
    int edge_index = 0;
    Vec2 tangent;
    Vec2 outward_normal;
    bool at_corner = false;
};

// Simply connected polygon, counterclockwise, parametrized by arclength with
// s = 0 at the first vertex. Immutable after construction.
struct Polygon {
    std::vector<Vec2> vertices;
    std::vector<double> edge_lengths;
    std::vector<Vec2> edge_tangents;
    std::vector<Vec2> edge_normals;
    double perimeter = 0.0;
    std::vector<double> corner_arclengths;  // s_j, s_0 = 0, strictly increasing
    std::vector<double> interior_angles;    // in (0, 2pi)
    std::vector<double> corner_params;      // p_j = 1 - angle_j / pi, |p_j| < 1

    int corner_count() const { return static_cast<int>(vertices.size()); }

    // Reduces an arclength to [0, L). A single add/subtract for arguments
    // within one period; floor-based for anything farther out.
    double reduce_arclength(double s) const {
        if (s >= 0.0 && s < perimeter) return s;
        if (s >= perimeter && s < 2.0 * perimeter) return s - perimeter;
        if (s < 0.0 && s >= -perimeter) return s + perimeter;
        double r = s - perimeter * std::floor(s / perimeter);
        if (r >= perimeter) r -= perimeter;
        if (r < 0.0) r += perimeter;
        return r;
    }

    // Signed arclength difference wrapped to (-L/2, L/2].
    double wrapped_difference(double s, double t) const {
        double d = reduce_arclength(s) - reduce_arclength(t);
        if (d > 0.5 * perimeter) d -= perimeter;
        if (d <= -0.5 * perimeter) d += perimeter;
        return d;
    }

    // Index of the edge containing arclength s in [0, L); a corner arclength
    // maps to the edge departing from it.
    int edge_of(double s_reduced) const {
        auto it = std::upper_bound(corner_arclengths.begin(), corner_arclengths.end(), s_reduced);
        return static_cast<int>(it - corner_arclengths.begin()) - 1;
    }

    // Regularity threshold 1/(1+|p_j|) used for grading selection.
    double alpha_star(int j) const { return 1.0 / (1.0 + std::abs(corner_params[j])); }
};

namespace detail {

// Proper intersection test between closed segments [a,b] and [c,d].
inline bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    auto orient = [](Vec2 p, Vec2 q, Vec2 r) {
        double v = cross(q - p, r - p);
        if (v > 0.0) return 1;
        if (v < 0.0) return -1;
        return 0;
    };
    auto on_segment = [](Vec2 p, Vec2 q, Vec2 r) {
        return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) &&
               std::min(p.y, q.y) <= r.y && r.y <= std::max(p.y, q.y);
    };
    int o1 = orient(a, b, c), o2 = orient(a, b, d);
    int o3 = orient(c, d, a), o4 = orient(c, d, b);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(a, b, c)) return true;
    if (o2 == 0 && on_segment(a, b, d)) return true;
    if (o3 == 0 && on_segment(c, d, a)) return true;
    if (o4 == 0 && on_segment(c, d, b)) return true;
    return false;
}

}  // namespace detail

inline Polygon build_polygon(std::vector<Vec2> vertices) {
    const int r = static_cast<int>(vertices.size());
    if (r < 3) throw DegenerateEdge("polygon needs at least 3 vertices");

    double area2 = 0.0;
    for (int i = 0; i < r; ++i) {
        const Vec2 a = vertices[i], b = vertices[(i + 1) % r];
        area2 += cross(a, b);
    }
    if (area2 == 0.0) throw SelfIntersection("vertex loop has zero signed area");
    if (area2 < 0.0) std::reverse(vertices.begin(), vertices.end());

    Polygon poly;
    poly.vertices = std::move(vertices);

    double scale = 0.0;
    for (const Vec2& v : poly.vertices) scale = std::max(scale, std::max(std::abs(v.x), std::abs(v.y)));
    if (scale == 0.0) scale = 1.0;

    for (int i = 0; i < r; ++i) {
        const Vec2 a = poly.vertices[i], b = poly.vertices[(i + 1) % r];
        const double len = norm(b - a);
        if (len <= 1e-14 * scale)
            throw DegenerateEdge("edge " + std::to_string(i) + " has zero length");
        poly.edge_lengths.push_back(len);
        poly.edge_tangents.push_back((1.0 / len) * (b - a));
        poly.edge_normals.push_back(rotate_cw(poly.edge_tangents.back()));
    }

    // Non-adjacent edges must not touch; adjacent edges share exactly the
    // common vertex (checked via the collinearity test below).
    for (int i = 0; i < r; ++i) {
        for (int j = i + 1; j < r; ++j) {
            if (j == i + 1 || (i == 0 && j == r - 1)) continue;
            if (detail::segments_intersect(poly.vertices[i], poly.vertices[(i + 1) % r],
                                           poly.vertices[j], poly.vertices[(j + 1) % r]))
                throw SelfIntersection("edges " + std::to_string(i) + " and " + std::to_string(j) + " intersect");
        }
    }

    poly.corner_arclengths.resize(r);
    poly.corner_arclengths[0] = 0.0;
    for (int i = 1; i < r; ++i)
        poly.corner_arclengths[i] = poly.corner_arclengths[i - 1] + poly.edge_lengths[i - 1];
    poly.perimeter = poly.corner_arclengths[r - 1] + poly.edge_lengths[r - 1];

    for (int i = 0; i < r; ++i) {
        const Vec2 d_in = poly.edge_tangents[(i + r - 1) % r];
        const Vec2 d_out = poly.edge_tangents[i];
        const double turn = std::atan2(cross(d_in, d_out), dot(d_in, d_out));
        const double p = turn / M_PI;
        if (std::abs(p) < 1e-12)
            throw CollinearCorner("vertex " + std::to_string(i) + " has interior angle pi");
        poly.interior_angles.push_back(M_PI - turn);
        poly.corner_params.push_back(p);
    }
    return poly;
}

inline BoundarySample point_at(const Polygon& poly, double s) {
    BoundarySample out;
    const double sr = poly.reduce_arclength(s);
    const int e = poly.edge_of(sr);
    out.s = sr;
    out.edge_index = e;
    out.tangent = poly.edge_tangents[e];
    out.outward_normal = poly.edge_normals[e];
    const double offset = sr - poly.corner_arclengths[e];
    out.point = poly.vertices[e] + offset * out.tangent;
    out.at_corner = (offset == 0.0);
    return out;
}

// Initial partition gamma_0 < ... < gamma_{r-1}, one breakpoint strictly
// between each pair of consecutive corners so every corner is interior to
// its segment.
struct PartitionSpec {
    std::vector<double> gamma;
};

inline void validate_partition(const Polygon& poly, const PartitionSpec& part) {
    const int r = poly.corner_count();
    if (static_cast<int>(part.gamma.size()) != r)
        throw InvalidSpec("partition has " + std::to_string(part.gamma.size()) +
                          " breakpoints, expected " + std::to_string(r));
    const double margin = 1e-9 * poly.perimeter;
    for (int j = 0; j < r; ++j) {
        const double lo = poly.corner_arclengths[j];
        const double hi = (j + 1 < r) ? poly.corner_arclengths[j + 1] : poly.perimeter;
        if (!(part.gamma[j] > lo + margin && part.gamma[j] < hi - margin))
            throw InvalidSpec("gamma[" + std::to_string(j) + "] not strictly between corners");
    }
}

inline PartitionSpec default_partition(const Polygon& poly) {
    PartitionSpec part;
    const int r = poly.corner_count();
    for (int j = 0; j < r; ++j) {
        const double lo = poly.corner_arclengths[j];
        const double hi = (j + 1 < r) ? poly.corner_arclengths[j + 1] : poly.perimeter;
        part.gamma.push_back(0.5 * (lo + hi));
    }
    return part;
}

}  // namespace cornerbie
