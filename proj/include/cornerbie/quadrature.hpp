#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "cornerbie/errors.hpp"
#include "cornerbie/mesh.hpp"

namespace cornerbie {

// Compensated (Kahan) accumulator; used for all composite sums so results do
// not depend on panel count at the h^6 signal level.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double v) {
        const double y = v - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

// Gauss-Legendre rule mapped to [0,1]. Nodes strictly increasing, weights sum
// to one, exact for polynomials of degree <= 2*order - 1.
struct QuadratureRule {
    int order = 0;
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline QuadratureRule gauss_rule(int order) {
    if (order < 1 || order > 64)
        throw UnsupportedOrder("gauss rule order must be in [1, 64], got " + std::to_string(order));
    QuadratureRule rule;
    rule.order = order;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    const int m = (order + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Newton iteration on P_n with the Chebyshev-like initial guess.
        double z = std::cos(M_PI * (i + 0.75) / (order + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < order; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
            }
            pp = order * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        // Map from [-1,1] to [0,1].
        rule.nodes[i] = 0.5 * (1.0 - z);
        rule.nodes[order - 1 - i] = 0.5 * (1.0 + z);
        const double w = 1.0 / ((1.0 - z * z) * pp * pp);
        rule.weights[i] = w;
        rule.weights[order - 1 - i] = w;
    }
    return rule;
}

template <class F>
double composite_integrate(F&& f, std::span<const Panel> panels, const QuadratureRule& rule) {
    KahanSum acc;
    for (const Panel& p : panels) {
        for (int k = 0; k < rule.order; ++k) {
            const double t = p.t_lo + rule.nodes[k] * p.width;
            const double v = f(t);
            if (!std::isfinite(v))
                throw NonFiniteIntegrand("integrand not finite at t = " + std::to_string(t));
            acc.add(p.width * rule.weights[k] * v);
        }
    }
    return acc.value();
}

struct AdaptiveResult {
    double value = 0.0;
    double error_estimate = 0.0;
    int subdivisions = 0;
};

namespace detail {

template <class F>
void gauss_pair(F&& f, double a, double b, const QuadratureRule& lo, const QuadratureRule& hi,
                double& value, double& err) {
    const double w = b - a;
    KahanSum slo, shi;
    for (int k = 0; k < lo.order; ++k) slo.add(lo.weights[k] * f(a + lo.nodes[k] * w));
    for (int k = 0; k < hi.order; ++k) {
        const double v = f(a + hi.nodes[k] * w);
        if (!std::isfinite(v))
            throw NonFiniteIntegrand("integrand not finite at t = " + std::to_string(a + hi.nodes[k] * w));
        shi.add(hi.weights[k] * v);
    }
    value = w * shi.value();
    err = std::abs(value - w * slo.value());
}

}  // namespace detail

// Globally adaptive bisection with an embedded 10/20-point Gauss pair and a
// worst-interval-first schedule. Subdivision order is a deterministic
// function of the input, so results are bit-reproducible. The error total is
// re-summed exactly at intervals to keep tolerances near 1e-13 meaningful.
template <class F>
AdaptiveResult adaptive_integrate(F&& f, double a, double b, double tol) {
    static constexpr int kMaxDepth = 60;
    const QuadratureRule rule_lo = gauss_rule(10);
    const QuadratureRule rule_hi = gauss_rule(20);

    struct Interval {
        double a, b, value, err;
        int depth;
    };
    struct Worst {
        bool operator()(const Interval& x, const Interval& y) const {
            if (x.err != y.err) return x.err < y.err;
            if (x.a != y.a) return x.a > y.a;
            return x.b > y.b;
        }
    };

    std::vector<Interval> heap;
    const auto exact_total = [&heap] {
        KahanSum s;
        for (const Interval& iv : heap) s.add(iv.err);
        return s.value();
    };

    Interval root{a, b, 0.0, 0.0, 0};
    detail::gauss_pair(f, a, b, rule_lo, rule_hi, root.value, root.err);
    heap.push_back(root);
    double total_err = root.err;
    int subdivisions = 0;

    while (total_err > tol) {
        const Interval worst = heap.front();
        if (worst.err == 0.0) break;
        if (worst.depth >= kMaxDepth)
            throw MaxDepthExceeded("adaptive integration stalled at depth 60 near t = " +
                                   std::to_string(worst.a));
        if (subdivisions > 200000)
            throw MaxDepthExceeded("adaptive integration exceeded subdivision budget");
        std::pop_heap(heap.begin(), heap.end(), Worst{});
        heap.pop_back();
        const double mid = 0.5 * (worst.a + worst.b);
        Interval left{worst.a, mid, 0.0, 0.0, worst.depth + 1};
        Interval right{mid, worst.b, 0.0, 0.0, worst.depth + 1};
        detail::gauss_pair(f, left.a, left.b, rule_lo, rule_hi, left.value, left.err);
        detail::gauss_pair(f, right.a, right.b, rule_lo, rule_hi, right.value, right.err);
        heap.push_back(left);
        std::push_heap(heap.begin(), heap.end(), Worst{});
        heap.push_back(right);
        std::push_heap(heap.begin(), heap.end(), Worst{});
        ++subdivisions;
        total_err = total_err - worst.err + left.err + right.err;
        if ((subdivisions & 31) == 0 || total_err <= tol) total_err = exact_total();
    }

    // Fold in a deterministic order independent of heap layout.
    std::sort(heap.begin(), heap.end(),
              [](const Interval& x, const Interval& y) { return x.a < y.a; });
    KahanSum value, err;
    for (const Interval& iv : heap) {
        value.add(iv.value);
        err.add(iv.err);
    }
    return {value.value(), err.value(), subdivisions};
}

}  // namespace cornerbie
