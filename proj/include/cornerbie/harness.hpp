#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cornerbie/errors.hpp"
#include "cornerbie/geometry.hpp"
#include "cornerbie/kernel.hpp"
#include "cornerbie/mesh.hpp"
#include "cornerbie/operators.hpp"
#include "cornerbie/quadrature.hpp"

namespace cornerbie {

enum class Method { galerkin, iterated_galerkin, modified, iterated_modified };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::galerkin: return "galerkin";
        case Method::iterated_galerkin: return "iterated_galerkin";
        case Method::modified: return "modified";
        case Method::iterated_modified: return "iterated_modified";
    }
    return "?";
}

namespace detail {

// Memoizing wrapper for expensive oracle-backed boundary functions. Values
// depend only on the argument, so the cache keeps results deterministic no
// matter which consumer evaluates first.
class CachedFn {
public:
    explicit CachedFn(std::function<double(double)> fn)
        : fn_(std::move(fn)), state_(std::make_shared<State>()) {}

    double operator()(double s) const {
        long long key;
        static_assert(sizeof(key) == sizeof(s));
        std::memcpy(&key, &s, sizeof(key));
        {
            std::lock_guard<std::mutex> lock(state_->mutex);
            auto it = state_->values.find(key);
            if (it != state_->values.end()) return it->second;
        }
        const double v = fn_(s);
        std::lock_guard<std::mutex> lock(state_->mutex);
        state_->values.emplace(key, v);
        return v;
    }

private:
    struct State {
        std::mutex mutex;
        std::unordered_map<long long, double> values;
    };
    std::function<double(double)> fn_;
    std::shared_ptr<State> state_;
};

inline double winding_number(const Polygon& poly, Vec2 x) {
    KahanSum acc;
    const int r = poly.corner_count();
    for (int e = 0; e < r; ++e)
        acc.add(subtended_angle(x, poly.vertices[e], poly.vertices[(e + 1) % r]));
    return acc.value() / M_PI;
}

// C-infinity cutoff: 1 below rho/2, 0 above rho.
inline double smooth_cutoff(double d, double rho) {
    if (d <= 0.5 * rho) return 1.0;
    if (d >= rho) return 0.0;
    const double t = (d - 0.5 * rho) / (0.5 * rho);
    const auto bump = [](double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; };
    return bump(1.0 - t) / (bump(1.0 - t) + bump(t));
}

}  // namespace detail

// Brute-force application of T to an arbitrary boundary function: adaptive
// quadrature edge by edge. The observation edge contributes exactly zero and
// is skipped; the two neighboring edges are integrated against the corner
// closed form in offset coordinates, which stays exact for observation
// points arbitrarily close to a corner.
template <class F>
double oracle_apply_T(const Polygon& poly, F&& fn, double s, double tol) {
    const double sr = poly.reduce_arclength(s);
    const int obs_edge = poly.edge_of(sr);
    const int r = poly.corner_count();
    KahanSum acc;
    for (int e = 0; e < r; ++e) {
        if (e == obs_edge) continue;
        const double lo = poly.corner_arclengths[e];
        const double hi = lo + poly.edge_lengths[e];
        const EdgeRelation rel = classify_edges(obs_edge, e, r);
        if (rel.kind == EdgeRelation::Kind::adjacent) {
            // Integrate in the offset variable so the kernel's boundary layer
            // at b ~ a keeps full precision however small a is.
            const double sc = poly.corner_arclengths[rel.corner];
            const double pc = poly.corner_params[rel.corner];
            const double a = std::abs(poly.wrapped_difference(sr, sc));
            const bool outgoing = e == rel.corner;
            acc.add(adaptive_integrate(
                        [&](double b) {
                            const double t = poly.reduce_arclength(outgoing ? sc + b : sc - b);
                            return corner_kernel(pc, a, b) * fn(t);
                        },
                        0.0, poly.edge_lengths[e], tol / r)
                        .value);
        } else {
            const Vec2 x = point_at(poly, sr).point;
            const Vec2 n_y = poly.edge_normals[e];
            acc.add(adaptive_integrate(
                        [&](double t) {
                            const Vec2 y = point_at(poly, t).point;
                            const Vec2 dxy = y - x;
                            return dot(n_y, dxy) / (M_PI * dot(dxy, dxy)) *
                                   fn(poly.reduce_arclength(t));
                        },
                        lo, hi, tol / r)
                        .value);
        }
    }
    return acc.value();
}

enum class Profile { smooth, corner_singular };

// A solvable instance of (I + T) u = f. Manufactured problems carry the exact
// density; harmonic problems carry the target potential and checkpoints.
struct Problem {
    enum class Kind { manufactured, harmonic };
    Kind kind = Kind::manufactured;
    Polygon polygon;
    PartitionSpec partition;
    std::function<double(double)> u_exact;  // manufactured only
    std::function<double(double)> f;
    std::function<double(Vec2)> g;  // harmonic only
    std::vector<Vec2> checkpoints;  // harmonic only
    double oracle_tol = 1e-12;
};

// Manufactured problem from an explicit density: f = u + T u with the T
// applied by the adaptive oracle.
inline Problem make_manufactured_from(const Polygon& poly, const PartitionSpec& part,
                                      std::function<double(double)> u_exact,
                                      double oracle_tol = 1e-12) {
    Problem prob;
    prob.kind = Problem::Kind::manufactured;
    prob.polygon = poly;
    prob.partition = part;
    prob.u_exact = u_exact;
    prob.oracle_tol = oracle_tol;
    prob.f = detail::CachedFn([poly, u_exact, oracle_tol](double s) {
        return u_exact(s) + oracle_apply_T(poly, u_exact, s, oracle_tol);
    });
    return prob;
}

inline Problem make_manufactured(const Polygon& poly, const PartitionSpec& part, Profile profile,
                                 double oracle_tol = 1e-12) {
    const double L = poly.perimeter;
    std::function<double(double)> u;
    if (profile == Profile::smooth) {
        u = [L](double s) { return std::cos(2.0 * M_PI * s / L); };
    } else {
        // cos plus one near-worst-regularity corner term per corner,
        // truncated smoothly inside the corner's segment.
        const Polygon p = poly;
        const PartitionSpec pt = part;
        u = [p, pt, L](double s) {
            double v = std::cos(2.0 * M_PI * s / L);
            const int r = p.corner_count();
            for (int j = 0; j < r; ++j) {
                const double sj = p.corner_arclengths[j];
                const double gp = pt.gamma[j];
                const double gm = pt.gamma[(j + r - 1) % r];
                const double rho = std::min(std::abs(p.wrapped_difference(sj, gm)),
                                            std::abs(p.wrapped_difference(gp, sj)));
                const double d = std::abs(p.wrapped_difference(s, sj));
                if (d >= rho) continue;
                const double expo = p.alpha_star(j) + 0.05;
                v += std::pow(d, expo) * detail::smooth_cutoff(d, rho);
            }
            return v;
        };
    }
    return make_manufactured_from(poly, part, std::move(u), oracle_tol);
}

inline Problem make_harmonic(const Polygon& poly, const PartitionSpec& part, Vec2 x_ext,
                             std::vector<Vec2> checkpoints) {
    if (std::abs(detail::winding_number(poly, x_ext)) > 1e-6)
        throw PointPlacement("x_ext is not strictly exterior");
    for (const Vec2& c : checkpoints)
        if (std::abs(detail::winding_number(poly, c) - 2.0) > 1e-6)
            throw PointPlacement("checkpoint is not strictly interior");
    Problem prob;
    prob.kind = Problem::Kind::harmonic;
    prob.polygon = poly;
    prob.partition = part;
    prob.g = [x_ext](Vec2 x) { return std::log(norm(x - x_ext)); };
    const Polygon p = poly;
    prob.f = [p, x_ext](double s) { return std::log(norm(point_at(p, s).point - x_ext)); };
    prob.checkpoints = std::move(checkpoints);
    return prob;
}

// Mesh-independent sample grid: 33 points per half-segment placed by the q=7
// grading law toward the corner, offset so no point comes within 1e-6 L of a
// corner or partition breakpoint. Identical across refinement levels, so
// pointwise combinations of different runs are well-defined.
inline std::vector<double> evaluation_grid(const Polygon& poly, const PartitionSpec& part) {
    const double L = poly.perimeter;
    const double eps = 1e-6 * L;
    const int r = poly.corner_count();
    std::vector<double> grid;
    grid.reserve(2 * r * 33);
    for (int j = 0; j < r; ++j) {
        const double sj = poly.corner_arclengths[j];
        const double h_minus = std::abs(poly.wrapped_difference(sj, part.gamma[(j + r - 1) % r]));
        const double h_plus = std::abs(poly.wrapped_difference(part.gamma[j], sj));
        for (int k = 1; k <= 33; ++k) {
            const double frac = std::pow(k / 34.0, 7.0);
            grid.push_back(poly.reduce_arclength(sj - (eps + frac * (h_minus - eps))));
        }
        for (int k = 1; k <= 33; ++k) {
            const double frac = std::pow(k / 34.0, 7.0);
            grid.push_back(poly.reduce_arclength(sj + eps + frac * (h_plus - eps)));
        }
    }
    return grid;
}

struct MethodRun {
    GradedMeshSpec spec;
    Method method = Method::galerkin;
    std::shared_ptr<const Density> density;
    double sup_error = 0.0;
    double wall_seconds = 0.0;
};

namespace detail {

inline Density make_iterated_density(MeshPtr mesh, std::shared_ptr<const MeshQuadrature> mq,
                                     std::shared_ptr<const Density> inner,
                                     std::function<double(double)> f, bool fill_nodes) {
    PointwiseDensity pd;
    pd.mesh = mesh;
    pd.mq = mq;
    pd.eval = [inner, f](double s) { return f(s) - apply_T(*inner, s); };
    if (fill_nodes) {
        pd.node_values.resize(mq->node_count());
        for (int k = 0; k < mq->node_count(); ++k) pd.node_values[k] = pd.eval(mq->node_s[k]);
    }
    return pd;
}

// Per-point measurement values for one solved density: density values on the
// evaluation grid (manufactured) or interior potentials at the checkpoints
// (harmonic).
inline std::vector<double> measurement_vector(const Problem& prob, const Density& d,
                                              const std::vector<double>& grid) {
    std::vector<double> out;
    if (prob.kind == Problem::Kind::manufactured) {
        out.reserve(grid.size());
        for (double s : grid) out.push_back(evaluate_density(d, s));
    } else {
        out.reserve(prob.checkpoints.size());
        for (const Vec2& x : prob.checkpoints) out.push_back(interior_potential(d, x));
    }
    return out;
}

inline std::vector<double> measurement_targets(const Problem& prob,
                                               const std::vector<double>& grid) {
    std::vector<double> out;
    if (prob.kind == Problem::Kind::manufactured) {
        for (double s : grid) out.push_back(prob.u_exact(s));
    } else {
        for (const Vec2& x : prob.checkpoints) out.push_back(prob.g(x));
    }
    return out;
}

inline double sup_difference(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::abs(a[i] - b[i]);
        if (std::isnan(d)) return d;  // propagate instead of silently dropping
        m = std::max(m, d);
    }
    return m;
}

}  // namespace detail

// Solves one mesh once and reports every requested method from the shared
// factorizations. A and the Galerkin solve are shared by all methods; C is
// assembled only when a modified-family method is requested.
inline std::vector<MethodRun> run_methods(const Problem& prob, MeshPtr mesh,
                                          const std::vector<Method>& methods,
                                          const QuadratureRule& rule) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();

    const bool want_modified =
        std::any_of(methods.begin(), methods.end(),
                    [](Method m) { return m == Method::modified || m == Method::iterated_modified; });
    const bool want_galerkin =
        std::any_of(methods.begin(), methods.end(),
                    [](Method m) { return m == Method::galerkin || m == Method::iterated_galerkin; });

    auto mq = std::make_shared<const MeshQuadrature>(build_mesh_quadrature(mesh, rule));
    const GalerkinMatrix A = assemble_galerkin_matrix(mesh, rule);

    std::shared_ptr<const Density> galerkin_density;
    if (want_galerkin) {
        const PiecewiseConstant pf = project(*mq, prob.f);
        galerkin_density = std::make_shared<const Density>(solve_galerkin(A, pf));
    }
    std::shared_ptr<const Density> modified_density;
    if (want_modified) {
        const IteratedKernelMatrix C = assemble_iterated_matrix(mesh, rule);
        modified_density = std::make_shared<const Density>(solve_modified(A, C, mesh, prob.f, rule));
    }
    const double shared_seconds = std::chrono::duration<double>(clock::now() - t0).count();

    const std::vector<double> grid = evaluation_grid(prob.polygon, prob.partition);
    const std::vector<double> targets = detail::measurement_targets(prob, grid);
    const bool fill_nodes = prob.kind == Problem::Kind::harmonic;

    std::vector<MethodRun> out;
    for (Method method : methods) {
        const auto t1 = clock::now();
        std::shared_ptr<const Density> d;
        switch (method) {
            case Method::galerkin: d = galerkin_density; break;
            case Method::modified: d = modified_density; break;
            case Method::iterated_galerkin:
                d = std::make_shared<const Density>(detail::make_iterated_density(
                    mesh, mq, galerkin_density, prob.f, fill_nodes));
                break;
            case Method::iterated_modified:
                d = std::make_shared<const Density>(detail::make_iterated_density(
                    mesh, mq, modified_density, prob.f, fill_nodes));
                break;
        }
        MethodRun run;
        run.spec = mesh->spec;
        run.method = method;
        run.density = d;
        run.sup_error = detail::sup_difference(detail::measurement_vector(prob, *d, grid), targets);
        run.wall_seconds =
            shared_seconds + std::chrono::duration<double>(clock::now() - t1).count();
        out.push_back(std::move(run));
    }
    return out;
}

inline MethodRun run_method(const Problem& prob, MeshPtr mesh, Method method,
                            const QuadratureRule& rule) {
    return run_methods(prob, mesh, {method}, rule)[0];
}

// Estimated orders of convergence under mesh halving.
inline std::vector<double> eoc(const std::vector<double>& errors) {
    if (errors.size() < 2) throw NonPositiveError("eoc needs at least two levels");
    for (double e : errors)
        if (!(e > 0.0)) throw NonPositiveError("eoc requires strictly positive errors");
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < errors.size(); ++i)
        out.push_back(std::log2(errors[i] / errors[i + 1]));
    return out;
}

struct Fraction {
    long long num = 0;
    long long den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
};

struct ExtrapolationRun {
    MethodRun base;
    double extrapolated_sup_error = 0.0;
    Fraction c_fine;
    Fraction c_base;
    double wall_seconds = 0.0;
};

// Multi-parameter Richardson extrapolation: the base solve plus r solves with
// one segment halved each, combined pointwise on the shared grid with the
// order-p elimination coefficients 2^p/(2^p - 1) and 1 - r 2^p/(2^p - 1).
inline ExtrapolationRun extrapolate(const Problem& prob, const GradedMeshSpec& base_spec,
                                    Method method, int p, const QuadratureRule& rule) {
    if (method != Method::iterated_galerkin && method != Method::iterated_modified)
        throw ValidationError("extrapolation requires an iterated method tag");
    if (p != 2 && p != 4) throw ValidationError("extrapolation order p must be 2 or 4");
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();

    const int r = prob.polygon.corner_count();
    const std::vector<double> grid = evaluation_grid(prob.polygon, prob.partition);
    const std::vector<double> targets = detail::measurement_targets(prob, grid);

    const MeshPtr base_mesh =
        share_mesh(build_graded_mesh(prob.polygon, prob.partition, base_spec));

    ExtrapolationRun out;
    out.base = run_method(prob, base_mesh, method, rule);
    const std::vector<double> base_values =
        detail::measurement_vector(prob, *out.base.density, grid);

    std::vector<double> combined(base_values.size(), 0.0);
    const long long two_p = 1LL << p;
    out.c_fine = {two_p, two_p - 1};
    out.c_base = {(two_p - 1) - r * two_p, two_p - 1};

    for (int j = 0; j < r; ++j) {
        const MeshPtr mesh_j = share_mesh(refine_segment(*base_mesh, j));
        const MethodRun run_j = run_method(prob, mesh_j, method, rule);
        const std::vector<double> vals = detail::measurement_vector(prob, *run_j.density, grid);
        for (std::size_t k = 0; k < combined.size(); ++k) combined[k] += vals[k];
    }
    const double cf = out.c_fine.value();
    const double cb = out.c_base.value();
    for (std::size_t k = 0; k < combined.size(); ++k)
        combined[k] = cf * combined[k] + cb * base_values[k];

    out.extrapolated_sup_error = detail::sup_difference(combined, targets);
    out.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    return out;
}

struct DiagnosticsRow {
    GradedMeshSpec spec;
    double h_max = 0.0;
    int panels = 0;
    double defect_single = 0.0;  // sup |T (I - pi_h) u|
    double defect_double = 0.0;  // sup |T (I - pi_h) T (I - pi_h) u|
};

// Empirical operator-decay diagnostics behind the paper-facing convergence
// claims. T u_exact comes from the adaptive oracle; T of projected parts is
// exact via angle sums.
inline std::vector<DiagnosticsRow> operator_diagnostics(const Problem& prob,
                                                        const std::vector<GradedMeshSpec>& specs,
                                                        const QuadratureRule& rule) {
    if (!prob.u_exact) throw ValidationError("diagnostics require manufactured u_exact");
    const Polygon& poly = prob.polygon;
    const std::vector<double> grid = evaluation_grid(poly, prob.partition);

    detail::CachedFn t_u([&poly, &prob](double s) {
        return oracle_apply_T(poly, prob.u_exact, s, prob.oracle_tol);
    });

    std::vector<DiagnosticsRow> out;
    for (const GradedMeshSpec& spec : specs) {
        const MeshPtr mesh = share_mesh(build_graded_mesh(poly, prob.partition, spec));
        const MeshQuadrature mq = build_mesh_quadrature(mesh, rule);
        const PiecewiseConstant pu = project(mq, prob.u_exact);

        // v = T (I - pi_h) u, evaluable anywhere on the boundary.
        const auto v = [&](double s) {
            return t_u(s) - apply_T_pc(*mesh, pu.coeffs, s);
        };
        std::vector<double> v_nodes(mq.node_count());
        for (int k = 0; k < mq.node_count(); ++k) v_nodes[k] = v(mq.node_s[k]);

        PiecewiseConstant pv;
        pv.mesh = mesh;
        pv.coeffs.resize(mesh->panel_count());
        for (int p = 0; p < mesh->panel_count(); ++p) {
            KahanSum acc;
            for (int k = mq.panel_nodes[p].first; k < mq.panel_nodes[p].second; ++k)
                acc.add(mq.node_w[k] * v_nodes[k]);
            pv.coeffs[p] = acc.value() / mesh->panels[p].width;
        }

        DiagnosticsRow row;
        row.spec = spec;
        row.h_max = mesh->h_max;
        row.panels = mesh->panel_count();
        for (double s : grid) {
            row.defect_single = std::max(row.defect_single, std::abs(v(s)));
            const double tv = apply_T_function(mq, v_nodes, v, s);
            const double tpv = apply_T_pc(*mesh, pv.coeffs, s);
            row.defect_double = std::max(row.defect_double, std::abs(tv - tpv));
        }
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace cornerbie
