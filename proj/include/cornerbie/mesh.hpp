#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cornerbie/errors.hpp"
#include "cornerbie/geometry.hpp"

namespace cornerbie {

// Per-segment interval counts and grading exponents. Segment j covers
// [gamma_{j-1}, gamma_j] and contains corner j in its interior.
struct GradedMeshSpec {
    std::vector<int> n;
    std::vector<double> q;
};

struct Panel {
    double t_lo = 0.0;
    double t_hi = 0.0;
    double width = 0.0;
    double midpoint_arclength = 0.0;
    int edge_index = 0;
    Vec2 p_lo;  // plane endpoint at t_lo
    Vec2 p_hi;  // plane endpoint at t_hi
};

enum class SegmentSide { minus, plus };

struct PanelLocation {
    int segment = 0;
    SegmentSide side = SegmentSide::plus;
};

// Corner-graded mesh. Panels tile [0, L) in boundary order; no panel crosses
// a corner or a partition breakpoint. Immutable after construction.
struct GradedMesh {
    Polygon polygon;
    PartitionSpec partition;
    GradedMeshSpec spec;
    std::vector<Panel> panels;
    std::vector<PanelLocation> segment_of_panel;
    std::vector<double> breakpoints;  // panels.size()+1 values, 0 ... L
    double h_max = 0.0;
    // Width of the first (corner-touching) panel on each side of every
    // corner; sets the analytic length scale of kernel integrands there.
    std::vector<double> first_width_minus;
    std::vector<double> first_width_plus;

    int panel_count() const { return static_cast<int>(panels.size()); }

    int panel_of(double s_reduced) const {
        auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), s_reduced);
        int idx = static_cast<int>(it - breakpoints.begin()) - 1;
        if (idx < 0) idx = 0;
        if (idx >= panel_count()) idx = panel_count() - 1;
        return idx;
    }

    // Corner bounding the panel's half-segment, and that corner's arclength.
    int corner_of_panel(int p) const { return segment_of_panel[p].segment; }
    double corner_arclength_of_panel(int p) const {
        return segment_of_panel[p].side == SegmentSide::minus && segment_of_panel[p].segment == 0
                   ? polygon.perimeter
                   : polygon.corner_arclengths[segment_of_panel[p].segment];
    }
    // Analyticity scale at the panel's corner: first panel width across it.
    double across_corner_scale(int p) const {
        const int j = segment_of_panel[p].segment;
        return segment_of_panel[p].side == SegmentSide::minus ? first_width_plus[j]
                                                              : first_width_minus[j];
    }
};

inline std::vector<double> recommend_grading(const Polygon& poly, int expansion_order) {
    if (expansion_order != 2 && expansion_order != 4)
        throw UnsupportedOrder("expansion order must be 2 or 4, got " + std::to_string(expansion_order));
    std::vector<double> q;
    q.reserve(poly.corner_count());
    for (int j = 0; j < poly.corner_count(); ++j)
        q.push_back(expansion_order * (1.0 + std::abs(poly.corner_params[j])) + 1.0);
    return q;
}

namespace detail {

// Graded nodes on one half-segment, walking away from the corner located at
// arclength s_c toward the far end at s_far. Endpoints are pinned exactly.
inline std::vector<double> half_segment_nodes(double s_c, double s_far, int n, double q) {
    std::vector<double> nodes(n + 1);
    nodes[0] = s_c;
    for (int i = 1; i < n; ++i)
        nodes[i] = s_c + std::pow(static_cast<double>(i) / n, q) * (s_far - s_c);
    nodes[n] = s_far;
    return nodes;
}

inline void append_panels(GradedMesh& mesh, const std::vector<double>& nodes, int edge,
                          int segment, SegmentSide side) {
    const bool ascending = nodes.back() > nodes.front();
    const int m = static_cast<int>(nodes.size()) - 1;
    for (int i = 0; i < m; ++i) {
        // minus-side nodes are generated corner-first, i.e. descending.
        const double lo = ascending ? nodes[i] : nodes[m - i];
        const double hi = ascending ? nodes[i + 1] : nodes[m - i - 1];
        Panel p;
        p.t_lo = lo;
        p.t_hi = hi;
        p.width = hi - lo;
        p.midpoint_arclength = 0.5 * (lo + hi);
        p.edge_index = edge;
        p.p_lo = point_at(mesh.polygon, lo).point;
        p.p_hi = point_at(mesh.polygon, hi == mesh.polygon.perimeter ? 0.0 : hi).point;
        mesh.panels.push_back(p);
        mesh.segment_of_panel.push_back({segment, side});
    }
}

}  // namespace detail

inline GradedMesh build_graded_mesh(const Polygon& poly, const PartitionSpec& part,
                                    const GradedMeshSpec& spec) {
    const int r = poly.corner_count();
    validate_partition(poly, part);
    if (static_cast<int>(spec.n.size()) != r || static_cast<int>(spec.q.size()) != r)
        throw InvalidSpec("mesh spec length does not match corner count " + std::to_string(r));
    for (int j = 0; j < r; ++j) {
        if (spec.n[j] < 1) throw InvalidSpec("n[" + std::to_string(j) + "] must be >= 1");
        if (spec.q[j] < 1.0) throw InvalidSpec("q[" + std::to_string(j) + "] must be >= 1");
    }

    GradedMesh mesh;
    mesh.polygon = poly;
    mesh.partition = part;
    mesh.spec = spec;

    const double L = poly.perimeter;

    // Canonical sweep over [0, L): plus side of corner 0, then both sides of
    // corners 1..r-1, then the wrapped minus side of corner 0 ending at L.
    detail::append_panels(mesh,
                          detail::half_segment_nodes(0.0, part.gamma[0], spec.n[0], spec.q[0]),
                          0, 0, SegmentSide::plus);
    for (int j = 1; j < r; ++j) {
        const double sj = poly.corner_arclengths[j];
        detail::append_panels(mesh,
                              detail::half_segment_nodes(sj, part.gamma[j - 1], spec.n[j], spec.q[j]),
                              j - 1, j, SegmentSide::minus);
        detail::append_panels(mesh,
                              detail::half_segment_nodes(sj, part.gamma[j], spec.n[j], spec.q[j]),
                              j, j, SegmentSide::plus);
    }
    detail::append_panels(mesh,
                          detail::half_segment_nodes(L, part.gamma[r - 1], spec.n[0], spec.q[0]),
                          r - 1, 0, SegmentSide::minus);

    mesh.breakpoints.reserve(mesh.panels.size() + 1);
    mesh.breakpoints.push_back(0.0);
    for (const Panel& p : mesh.panels) mesh.breakpoints.push_back(p.t_hi);

    mesh.h_max = 0.0;
    for (int j = 0; j < r; ++j) mesh.h_max = std::max(mesh.h_max, 1.0 / spec.n[j]);

    mesh.first_width_minus.assign(r, 0.0);
    mesh.first_width_plus.assign(r, 0.0);
    for (int p = 0; p < mesh.panel_count(); ++p) {
        const PanelLocation loc = mesh.segment_of_panel[p];
        const double corner_s = mesh.corner_arclength_of_panel(p);
        const Panel& pan = mesh.panels[p];
        if (loc.side == SegmentSide::minus && pan.t_hi == corner_s)
            mesh.first_width_minus[loc.segment] = pan.width;
        if (loc.side == SegmentSide::plus && pan.t_lo == corner_s)
            mesh.first_width_plus[loc.segment] = pan.width;
    }
    return mesh;
}

inline GradedMesh refine_segment(const GradedMesh& mesh, int j) {
    if (j < 0 || j >= mesh.polygon.corner_count())
        throw SegmentOutOfRange("segment " + std::to_string(j) + " out of range");
    GradedMeshSpec spec = mesh.spec;
    spec.n[j] *= 2;
    return build_graded_mesh(mesh.polygon, mesh.partition, spec);
}

}  // namespace cornerbie
