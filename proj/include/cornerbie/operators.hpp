#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cornerbie/errors.hpp"
#include "cornerbie/geometry.hpp"
#include "cornerbie/kernel.hpp"
#include "cornerbie/mesh.hpp"
#include "cornerbie/quadrature.hpp"

namespace cornerbie {

using MeshPtr = std::shared_ptr<const GradedMesh>;

inline MeshPtr share_mesh(GradedMesh mesh) {
    return std::make_shared<const GradedMesh>(std::move(mesh));
}

// Coefficient vector over the mesh panels (an element of S^h).
struct PiecewiseConstant {
    MeshPtr mesh;
    std::vector<double> coeffs;

    double sup_norm() const {
        double m = 0.0;
        for (double c : coeffs) m = std::max(m, std::abs(c));
        return m;
    }

    int panel_at(double s) const {
        const double sr = mesh->polygon.reduce_arclength(s);
        const double tol = 1e-13 * mesh->polygon.perimeter;
        const int p = mesh->panel_of(sr);
        if (std::abs(sr - mesh->panels[p].t_lo) < tol || std::abs(mesh->panels[p].t_hi - sr) < tol)
            throw EvaluationAtBreakpoint("evaluation at panel breakpoint s = " + std::to_string(sr));
        return p;
    }

    double operator()(double s) const { return coeffs[panel_at(s)]; }
};

// Quadrature nodes for panel-wise integrals over the whole mesh. Panels are
// pre-split dyadically toward their corner until each piece is no wider than
// its distance to the corner (floored at the first panel width across the
// corner, which is the analytic length scale of kernel integrands there).
struct MeshQuadrature {
    MeshPtr mesh;
    QuadratureRule rule;
    std::vector<double> node_s;
    std::vector<double> node_w;
    std::vector<Vec2> node_point;
    std::vector<int> node_panel;
    std::vector<std::pair<int, int>> panel_nodes;  // [begin, end) per panel

    int node_count() const { return static_cast<int>(node_s.size()); }
};

inline MeshQuadrature build_mesh_quadrature(MeshPtr mesh, const QuadratureRule& rule) {
    MeshQuadrature mq;
    mq.mesh = mesh;
    mq.rule = rule;
    const int np = mesh->panel_count();
    mq.panel_nodes.resize(np);
    for (int p = 0; p < np; ++p) {
        const Panel& pan = mesh->panels[p];
        const bool corner_at_lo = mesh->segment_of_panel[p].side == SegmentSide::plus;
        const double corner_s = mesh->corner_arclength_of_panel(p);
        const double floor_scale = std::max(mesh->across_corner_scale(p), 1e-14 * mesh->polygon.perimeter);

        std::vector<std::pair<double, double>> pieces;
        double lo = pan.t_lo, hi = pan.t_hi;
        for (int level = 0; level < 40; ++level) {
            const double dist = corner_at_lo ? lo - corner_s : corner_s - hi;
            if (hi - lo <= std::max(dist, floor_scale)) break;
            const double mid = 0.5 * (lo + hi);
            if (corner_at_lo) {
                pieces.emplace_back(mid, hi);
                hi = mid;
            } else {
                pieces.emplace_back(lo, mid);
                lo = mid;
            }
        }
        pieces.emplace_back(lo, hi);
        std::sort(pieces.begin(), pieces.end());

        const int begin = mq.node_count();
        for (const auto& [a, b] : pieces) {
            for (int k = 0; k < rule.order; ++k) {
                const double t = a + rule.nodes[k] * (b - a);
                mq.node_s.push_back(t);
                mq.node_w.push_back((b - a) * rule.weights[k]);
                mq.node_point.push_back(point_at(mesh->polygon, t).point);
                mq.node_panel.push_back(p);
            }
        }
        mq.panel_nodes[p] = {begin, mq.node_count()};
    }
    return mq;
}

// Panel-averaging projection onto S^h.
template <class F>
PiecewiseConstant project(const MeshQuadrature& mq, F&& f) {
    PiecewiseConstant out;
    out.mesh = mq.mesh;
    out.coeffs.resize(mq.mesh->panel_count());
    for (int p = 0; p < mq.mesh->panel_count(); ++p) {
        KahanSum acc;
        for (int k = mq.panel_nodes[p].first; k < mq.panel_nodes[p].second; ++k) {
            const double v = f(mq.node_s[k]);
            if (!std::isfinite(v))
                throw NonFiniteIntegrand("projection integrand not finite at s = " +
                                         std::to_string(mq.node_s[k]));
            acc.add(mq.node_w[k] * v);
        }
        out.coeffs[p] = acc.value() / mq.mesh->panels[p].width;
    }
    return out;
}

template <class F>
PiecewiseConstant project(MeshPtr mesh, F&& f, const QuadratureRule& rule) {
    return project(build_mesh_quadrature(mesh, rule), std::forward<F>(f));
}

namespace detail {

inline double kernel_point(Vec2 x_obs, Vec2 y, Vec2 n_y) {
    const Vec2 d = y - x_obs;
    return dot(n_y, d) / (M_PI * dot(d, d));
}

}  // namespace detail

// Applies T to a function given by cached values at the mesh quadrature nodes
// plus a pointwise fallback. Panels closer to the observation point than
// their own width are integrated in the kernel-exact angle variable with
// fresh evaluations; everything else uses the cached bulk nodes. This
// overload is for observation points off the boundary.
template <class F>
double apply_T_function(const MeshQuadrature& mq, std::span<const double> node_values, F&& fresh,
                        Vec2 x_obs) {
    const GradedMesh& mesh = *mq.mesh;
    KahanSum acc;
    for (int p = 0; p < mesh.panel_count(); ++p) {
        const Panel& pan = mesh.panels[p];
        const Vec2 n_y = mesh.polygon.edge_normals[pan.edge_index];
        const double dist = detail::point_segment_distance(x_obs, pan.p_lo, pan.p_hi);
        if (dist >= pan.width) {
            for (int k = mq.panel_nodes[p].first; k < mq.panel_nodes[p].second; ++k)
                acc.add(mq.node_w[k] * detail::kernel_point(x_obs, mq.node_point[k], n_y) *
                        node_values[k]);
        } else {
            acc.add(kernel_weighted_integral(x_obs, pan,
                                             mesh.polygon.edge_tangents[pan.edge_index], fresh,
                                             mq.rule));
        }
    }
    return acc.value();
}

// Boundary-observation version. Same-edge panels vanish; panels on the two
// neighboring edges are handled entirely in offsets from the shared corner.
template <class F>
double apply_T_function(const MeshQuadrature& mq, std::span<const double> node_values, F&& fresh,
                        double s_obs) {
    const GradedMesh& mesh = *mq.mesh;
    const Polygon& poly = mesh.polygon;
    const double sr = poly.reduce_arclength(s_obs);
    const int e_obs = poly.edge_of(sr);
    const int r = poly.corner_count();
    Vec2 x_obs;
    bool have_point = false;
    KahanSum acc;
    for (int p = 0; p < mesh.panel_count(); ++p) {
        const Panel& pan = mesh.panels[p];
        const EdgeRelation rel = classify_edges(e_obs, pan.edge_index, r);
        if (rel.kind == EdgeRelation::Kind::same) continue;
        if (rel.kind == EdgeRelation::Kind::adjacent) {
            const double sc = poly.corner_arclengths[rel.corner];
            const double pc = poly.corner_params[rel.corner];
            const double a = std::abs(poly.wrapped_difference(sr, sc));
            const auto [b_lo, b_hi] = detail::panel_offsets(poly, pan, sc);
            if (corner_segment_distance(pc, a, b_lo, b_hi) >= pan.width) {
                for (int k = mq.panel_nodes[p].first; k < mq.panel_nodes[p].second; ++k) {
                    const double b = std::abs(poly.wrapped_difference(mq.node_s[k], sc));
                    acc.add(mq.node_w[k] * corner_kernel(pc, a, b) * node_values[k]);
                }
            } else {
                const bool outgoing = pan.edge_index == rel.corner;
                acc.add(corner_kernel_weighted_integral(
                    pc, a, b_lo, b_hi,
                    [&](double b) { return fresh(poly.reduce_arclength(outgoing ? sc + b : sc - b)); },
                    mq.rule));
            }
            continue;
        }
        if (!have_point) {
            x_obs = point_at(poly, sr).point;
            have_point = true;
        }
        const Vec2 n_y = poly.edge_normals[pan.edge_index];
        if (detail::point_segment_distance(x_obs, pan.p_lo, pan.p_hi) >= pan.width) {
            for (int k = mq.panel_nodes[p].first; k < mq.panel_nodes[p].second; ++k)
                acc.add(mq.node_w[k] * detail::kernel_point(x_obs, mq.node_point[k], n_y) *
                        node_values[k]);
        } else {
            acc.add(kernel_weighted_integral(x_obs, pan, poly.edge_tangents[pan.edge_index],
                                             fresh, mq.rule));
        }
    }
    return acc.value();
}

// Matrix of pi_h T restricted to S^h: entries are panel averages of the
// exactly-integrated double layer of the basis indicators.
struct GalerkinMatrix {
    MeshPtr mesh;
    Eigen::MatrixXd A;
};

namespace detail {

// Panel average over target offsets a in [a_lo, a_hi] of the exact inner
// integral of the corner kernel over [b_lo, b_hi] on the other edge. The
// target range is split dyadically toward the corner until each piece is
// comfortably analytic, so the result holds at any grading depth.
inline double corner_pair_average(double p, double a_lo, double a_hi, double b_lo, double b_hi,
                                  const QuadratureRule& rule) {
    const double floor_scale = std::max(b_lo, 1e-2 * b_hi);
    std::vector<std::pair<double, double>> pieces;
    double lo = a_lo, hi = a_hi;
    for (int level = 0; level < 60; ++level) {
        if (hi - lo <= 0.5 * std::max(lo, floor_scale)) break;
        const double mid = 0.5 * (lo + hi);
        pieces.emplace_back(mid, hi);
        hi = mid;
    }
    pieces.emplace_back(lo, hi);
    KahanSum acc;
    for (const auto& [pa, pb] : pieces) {
        for (int k = 0; k < rule.order; ++k) {
            const double a = pa + rule.nodes[k] * (pb - pa);
            acc.add((pb - pa) * rule.weights[k] * corner_panel_integral(p, a, b_lo, b_hi));
        }
    }
    return acc.value() / (a_hi - a_lo);
}

}  // namespace detail

inline GalerkinMatrix assemble_galerkin_matrix(MeshPtr mesh, const QuadratureRule& rule) {
    const GradedMesh& m = *mesh;
    const Polygon& poly = m.polygon;
    const int n = m.panel_count();
    const int r = poly.corner_count();
    const MeshQuadrature mq = build_mesh_quadrature(mesh, rule);

    GalerkinMatrix out;
    out.mesh = mesh;
    out.A = Eigen::MatrixXd::Zero(n, n);

    for (int i = 0; i < n; ++i) {
        const Panel& ti = m.panels[i];
        for (int j = 0; j < n; ++j) {
            const Panel& tj = m.panels[j];
            const EdgeRelation rel = classify_edges(ti.edge_index, tj.edge_index, r);
            if (rel.kind == EdgeRelation::Kind::same) continue;  // exact zero
            if (rel.kind == EdgeRelation::Kind::adjacent) {
                const double sc = poly.corner_arclengths[rel.corner];
                const auto [a_lo, a_hi] = detail::panel_offsets(poly, ti, sc);
                const auto [b_lo, b_hi] = detail::panel_offsets(poly, tj, sc);
                out.A(i, j) = detail::corner_pair_average(poly.corner_params[rel.corner], a_lo,
                                                          a_hi, b_lo, b_hi, rule);
            } else {
                KahanSum acc;
                for (int k = mq.panel_nodes[i].first; k < mq.panel_nodes[i].second; ++k)
                    acc.add(mq.node_w[k] * panel_angle_integral(mq.node_point[k], tj));
                out.A(i, j) = acc.value() / ti.width;
            }
        }
    }
    return out;
}

namespace detail {

// Row of (T chi_j)(t) over all panels j for a boundary point given by
// arclength. Neighboring edges go through corner offsets, everything else
// through plane angles.
inline void indicator_row(const GradedMesh& mesh, double t_arc, double* row) {
    const Polygon& poly = mesh.polygon;
    const double tr = poly.reduce_arclength(t_arc);
    const int e_t = poly.edge_of(tr);
    const int r = poly.corner_count();
    Vec2 x;
    bool have_point = false;
    for (int j = 0; j < mesh.panel_count(); ++j) {
        const Panel& pan = mesh.panels[j];
        const EdgeRelation rel = classify_edges(e_t, pan.edge_index, r);
        if (rel.kind == EdgeRelation::Kind::same) {
            row[j] = 0.0;
        } else if (rel.kind == EdgeRelation::Kind::adjacent) {
            const double sc = poly.corner_arclengths[rel.corner];
            const double a = std::abs(poly.wrapped_difference(tr, sc));
            const auto [b_lo, b_hi] = panel_offsets(poly, pan, sc);
            row[j] = corner_panel_integral(poly.corner_params[rel.corner], a, b_lo, b_hi);
        } else {
            if (!have_point) {
                x = point_at(poly, tr).point;
                have_point = true;
            }
            row[j] = panel_angle_integral(x, pan);
        }
    }
}

}  // namespace detail

// Matrix of pi_h T T restricted to S^h. The innermost application of T is
// exact; the middle and outer integrals use the mesh quadrature, with near
// pairs switched to the kernel-exact angle variable and all adjacent-edge
// pairs evaluated in corner offsets.
struct IteratedKernelMatrix {
    MeshPtr mesh;
    Eigen::MatrixXd C;
};

inline IteratedKernelMatrix assemble_iterated_matrix(MeshPtr mesh, const QuadratureRule& rule) {
    const GradedMesh& m = *mesh;
    const Polygon& poly = m.polygon;
    const int n = m.panel_count();
    const int r = poly.corner_count();
    const MeshQuadrature mq = build_mesh_quadrature(mesh, rule);
    const int nn = mq.node_count();

    std::vector<double> corner_cp(r), corner_sp(r);
    for (int c = 0; c < r; ++c) {
        corner_cp[c] = std::cos(poly.corner_params[c] * M_PI);
        corner_sp[c] = std::sin(poly.corner_params[c] * M_PI);
    }
    // Node offsets from the start and end corners of the node's edge.
    std::vector<double> off_start(nn), off_end(nn);
    std::vector<int> node_edge(nn);
    for (int k = 0; k < nn; ++k) {
        const int e = m.panels[mq.node_panel[k]].edge_index;
        node_edge[k] = e;
        off_start[k] = std::abs(poly.wrapped_difference(mq.node_s[k], poly.corner_arclengths[e]));
        off_end[k] = std::abs(
            poly.wrapped_difference(mq.node_s[k], poly.corner_arclengths[(e + 1) % r]));
    }

    // W(k, j): double layer of indicator j at middle node k, exact.
    Eigen::MatrixXd W(nn, n);
    std::vector<double> row(n);
    for (int k = 0; k < nn; ++k) {
        detail::indicator_row(m, mq.node_s[k], row.data());
        for (int j = 0; j < n; ++j) W(k, j) = row[j];
    }

    IteratedKernelMatrix out;
    out.mesh = mesh;
    out.C = Eigen::MatrixXd::Zero(n, n);

    constexpr int kBlock = 128;
    Eigen::MatrixXd G(kBlock, nn);
    Eigen::MatrixXd F(kBlock, n);
    for (int row0 = 0; row0 < nn; row0 += kBlock) {
        const int rows = std::min(kBlock, nn - row0);
        G.setZero(kBlock, nn);
        // Bulk kernel values; near pairs are left out and corrected below.
        for (int pr = 0; pr < rows; ++pr) {
            const int p = row0 + pr;
            const Vec2 xp = mq.node_point[p];
            const int pe = node_edge[p];
            for (int mp = 0; mp < n; ++mp) {
                const Panel& pm = m.panels[mp];
                const EdgeRelation rel = classify_edges(pe, pm.edge_index, r);
                if (rel.kind == EdgeRelation::Kind::same) continue;
                if (rel.kind == EdgeRelation::Kind::adjacent) {
                    const double sc = poly.corner_arclengths[rel.corner];
                    const double a = rel.corner == pe ? off_start[p] : off_end[p];
                    const auto [b_lo, b_hi] = detail::panel_offsets(poly, pm, sc);
                    const double pc = poly.corner_params[rel.corner];
                    if (corner_segment_distance(pc, a, b_lo, b_hi) < pm.width) continue;
                    const double cp = corner_cp[rel.corner];
                    const double sp = corner_sp[rel.corner];
                    for (int k = mq.panel_nodes[mp].first; k < mq.panel_nodes[mp].second; ++k) {
                        const double b = rel.corner == pm.edge_index ? off_start[k] : off_end[k];
                        G(pr, k) = mq.node_w[k] * sp / M_PI * a /
                                   (a * a + b * b + 2.0 * a * b * cp);
                    }
                } else {
                    if (detail::point_segment_distance(xp, pm.p_lo, pm.p_hi) < pm.width) continue;
                    const Vec2 n_y = poly.edge_normals[pm.edge_index];
                    for (int k = mq.panel_nodes[mp].first; k < mq.panel_nodes[mp].second; ++k)
                        G(pr, k) = mq.node_w[k] * detail::kernel_point(xp, mq.node_point[k], n_y);
                }
            }
        }
        F.topRows(rows) = G.topRows(rows) * W;

        // Near-pair corrections in the angle variable.
        for (int pr = 0; pr < rows; ++pr) {
            const int p = row0 + pr;
            const Vec2 xp = mq.node_point[p];
            const int pe = node_edge[p];
            for (int mp = 0; mp < n; ++mp) {
                const Panel& pm = m.panels[mp];
                const EdgeRelation rel = classify_edges(pe, pm.edge_index, r);
                if (rel.kind == EdgeRelation::Kind::same) continue;
                if (rel.kind == EdgeRelation::Kind::adjacent) {
                    const double sc = poly.corner_arclengths[rel.corner];
                    const double a = rel.corner == pe ? off_start[p] : off_end[p];
                    const auto [b_lo, b_hi] = detail::panel_offsets(poly, pm, sc);
                    const double pc = poly.corner_params[rel.corner];
                    if (corner_segment_distance(pc, a, b_lo, b_hi) >= pm.width) continue;
                    const bool outgoing = pm.edge_index == rel.corner;
                    const double cp = corner_cp[rel.corner];
                    const double sp = corner_sp[rel.corner];
                    const double psi0 = std::atan((b_lo + a * cp) / (a * sp));
                    const double dpsi = std::atan((b_hi + a * cp) / (a * sp)) - psi0;
                    const double margin = 1e-9 * (b_hi - b_lo);
                    for (int k = 0; k < rule.order; ++k) {
                        const double b =
                            std::clamp(a * sp * std::tan(psi0 + rule.nodes[k] * dpsi) - a * cp,
                                       b_lo + margin, b_hi - margin);
                        const double t = poly.reduce_arclength(outgoing ? sc + b : sc - b);
                        detail::indicator_row(m, t, row.data());
                        const double wk = rule.weights[k] * dpsi / M_PI;
                        for (int j = 0; j < n; ++j) F(pr, j) += wk * row[j];
                    }
                } else {
                    if (detail::point_segment_distance(xp, pm.p_lo, pm.p_hi) >= pm.width) continue;
                    const Vec2 e = poly.edge_tangents[pm.edge_index];
                    const Vec2 nq = poly.edge_normals[pm.edge_index];
                    const double d = dot(nq, pm.p_lo - xp);
                    if (d == 0.0) continue;
                    const double xi0 = dot(e, pm.p_lo - xp);
                    const double phi0 = std::atan(xi0 / d);
                    const double dphi = std::atan(dot(e, pm.p_hi - xp) / d) - phi0;
                    for (int k = 0; k < rule.order; ++k) {
                        const double xi = d * std::tan(phi0 + rule.nodes[k] * dphi);
                        const double t = poly.reduce_arclength(pm.t_lo + (xi - xi0));
                        detail::indicator_row(m, t, row.data());
                        const double wk = rule.weights[k] * dphi / M_PI;
                        for (int j = 0; j < n; ++j) F(pr, j) += wk * row[j];
                    }
                }
            }
        }

        // Fold outer nodes into their panel averages.
        for (int pr = 0; pr < rows; ++pr) {
            const int p = row0 + pr;
            const int pi = mq.node_panel[p];
            const double w = mq.node_w[p] / m.panels[pi].width;
            out.C.row(pi) += w * F.row(pr);
        }
    }
    return out;
}

namespace detail {

inline Eigen::VectorXd lu_solve(const Eigen::MatrixXd& M, const Eigen::VectorXd& rhs,
                                const char* what) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
    const double norm = M.cwiseAbs().rowwise().sum().maxCoeff();
    const double pivot_min = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (pivot_min < 1e-13 * norm)
        throw SingularSystem(std::string(what) + ": pivot " + std::to_string(pivot_min) +
                             " below threshold");
    return lu.solve(rhs);
}

}  // namespace detail

// Galerkin solution of (I + pi_h T) u_h = pi_h f.
inline PiecewiseConstant solve_galerkin(const GalerkinMatrix& gm, const PiecewiseConstant& pf) {
    const int n = gm.A.rows();
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) + gm.A;
    Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(pf.coeffs.data(), n);
    Eigen::VectorXd c = detail::lu_solve(M, rhs, "galerkin system");
    PiecewiseConstant out;
    out.mesh = gm.mesh;
    out.coeffs.assign(c.data(), c.data() + n);
    return out;
}

// Solution of the modified projection equation (I + T_n^M) u = f with
// T_n^M = PTP + PT(I-P) + (I-P)TP, P = pi_h. Splitting u = y + z with
// y = Pu, z = (I-P)u gives the two block equations
//     y + PTy + PTz = Pf
//     z = (I-P)(f - Ty)
// and eliminating z yields the finite system
//     (I + A - C + A^2) y = Pf - P(Tf) + A Pf
// with A = matrix of PT and C = matrix of PTT on S^h. z is recovered
// pointwise from the second block equation.
struct CompositeDensity {
    MeshPtr mesh;
    PiecewiseConstant y;   // projected part
    PiecewiseConstant pf;  // panel averages of f
    PiecewiseConstant ay;  // A * y
    std::function<double(double)> f;
    std::shared_ptr<const MeshQuadrature> mq;
    std::vector<double> z_nodes;  // z cached at the quadrature nodes

    double z(double s) const {
        const int p = y.panel_at(s);
        return (f(s) - pf.coeffs[p]) - (apply_T_pc(*mesh, y.coeffs, s) - ay.coeffs[p]);
    }

    double operator()(double s) const {
        const int p = y.panel_at(s);
        return y.coeffs[p] + (f(s) - pf.coeffs[p]) -
               (apply_T_pc(*mesh, y.coeffs, s) - ay.coeffs[p]);
    }
};

inline CompositeDensity solve_modified(const GalerkinMatrix& gm, const IteratedKernelMatrix& km,
                                       MeshPtr mesh, std::function<double(double)> f,
                                       const QuadratureRule& rule) {
    const int n = mesh->panel_count();
    auto mq = std::make_shared<const MeshQuadrature>(build_mesh_quadrature(mesh, rule));

    std::vector<double> f_nodes(mq->node_count());
    for (int k = 0; k < mq->node_count(); ++k) f_nodes[k] = f(mq->node_s[k]);

    PiecewiseConstant pf;
    pf.mesh = mesh;
    pf.coeffs.resize(n);
    for (int p = 0; p < n; ++p) {
        KahanSum acc;
        for (int k = mq->panel_nodes[p].first; k < mq->panel_nodes[p].second; ++k)
            acc.add(mq->node_w[k] * f_nodes[k]);
        pf.coeffs[p] = acc.value() / mesh->panels[p].width;
    }

    // b1 = panel averages of Tf.
    Eigen::VectorXd b1(n);
    for (int p = 0; p < n; ++p) {
        KahanSum acc;
        for (int k = mq->panel_nodes[p].first; k < mq->panel_nodes[p].second; ++k)
            acc.add(mq->node_w[k] * apply_T_function(*mq, f_nodes, f, mq->node_s[k]));
        b1(p) = acc.value() / mesh->panels[p].width;
    }

    Eigen::VectorXd pf_vec = Eigen::Map<const Eigen::VectorXd>(pf.coeffs.data(), n);
    Eigen::MatrixXd M =
        Eigen::MatrixXd::Identity(n, n) + gm.A - km.C + Eigen::MatrixXd(gm.A * gm.A);
    Eigen::VectorXd rhs = pf_vec - b1 + gm.A * pf_vec;
    Eigen::VectorXd yv = detail::lu_solve(M, rhs, "modified projection system");

    CompositeDensity out;
    out.mesh = mesh;
    out.y.mesh = mesh;
    out.y.coeffs.assign(yv.data(), yv.data() + n);
    out.pf = pf;
    out.ay.mesh = mesh;
    Eigen::VectorXd ayv = gm.A * yv;
    out.ay.coeffs.assign(ayv.data(), ayv.data() + n);
    out.f = std::move(f);
    out.mq = mq;

    out.z_nodes.resize(mq->node_count());
    for (int k = 0; k < mq->node_count(); ++k) {
        const int p = mq->node_panel[k];
        const double ty = apply_T_pc(*mesh, out.y.coeffs, mq->node_s[k]);
        out.z_nodes[k] = (f_nodes[k] - pf.coeffs[p]) - (ty - out.ay.coeffs[p]);
    }
    return out;
}

// A boundary density in one of the three representations the methods produce.
// PointwiseDensity covers iterated solutions: cached node values plus an
// arbitrary-point evaluator.
struct PointwiseDensity {
    MeshPtr mesh;
    std::shared_ptr<const MeshQuadrature> mq;
    std::vector<double> node_values;
    std::function<double(double)> eval;

    double operator()(double s) const { return eval(s); }
};

using Density = std::variant<PiecewiseConstant, CompositeDensity, PointwiseDensity>;

inline double evaluate_density(const Density& d, double s) {
    return std::visit([&](const auto& v) { return v(s); }, d);
}

// Obs is either a plane point (off-boundary) or a boundary arclength; the
// dispatch below picks the matching apply_T_pc / apply_T_function overloads.
template <class Obs>
double apply_T(const Density& d, Obs obs) {
    return std::visit(
        [&](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, PiecewiseConstant>) {
                return apply_T_pc(*v.mesh, v.coeffs, obs);
            } else if constexpr (std::is_same_v<T, CompositeDensity>) {
                return apply_T_pc(*v.mesh, v.y.coeffs, obs) +
                       apply_T_function(*v.mq, v.z_nodes, [&](double t) { return v.z(t); }, obs);
            } else {
                return apply_T_function(*v.mq, v.node_values, v.eval, obs);
            }
        },
        d);
}

// Iterated (Sloan-type) post-processing f - T d at one point.
template <class F>
double iterate(const Density& d, F&& f, double s) {
    return f(s) - apply_T(d, s);
}

// Double-layer potential of the density at a strictly interior point.
inline double interior_potential(const Density& d, Vec2 x) {
    const MeshPtr mesh = std::visit([](const auto& v) { return v.mesh; }, d);
    std::vector<double> ones(mesh->panel_count(), 1.0);
    const double winding = apply_T_pc(*mesh, ones, x);
    if (std::abs(winding - 2.0) > 1e-6)
        throw PointNotInterior("winding value " + std::to_string(winding) + " at requested point");
    return apply_T(d, x);
}

}  // namespace cornerbie
