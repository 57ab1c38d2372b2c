#include <cstdio>

#include "cornerbie/cornerbie.hpp"

using namespace cornerbie;

int main() {
    const Polygon square = build_polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    const PartitionSpec part = default_partition(square);
    std::printf("L = %.17g, gamma0 = %.17g, p0 = %.17g\n", square.perimeter, part.gamma[0],
                square.corner_params[0]);

    GradedMeshSpec spec;
    spec.n = {4, 4, 4, 4};
    spec.q = {1, 1, 1, 1};
    const MeshPtr mesh = share_mesh(build_graded_mesh(square, part, spec));
    std::printf("panels = %d, h_max = %g\n", mesh->panel_count(), mesh->h_max);

    std::vector<double> ones(mesh->panel_count(), 1.0);
    std::printf("winding interior = %.17g\n", apply_T_pc(*mesh, ones, Vec2{0.5, 0.5}));
    std::printf("winding boundary = %.17g\n", apply_T_pc(*mesh, ones, 0.37));
    std::printf("winding exterior = %.17g\n", apply_T_pc(*mesh, ones, Vec2{3.0, 3.0}));

    const QuadratureRule rule = gauss_rule(10);
    const GalerkinMatrix A = assemble_galerkin_matrix(mesh, rule);
    double worst_row = 0.0;
    for (int i = 0; i < mesh->panel_count(); ++i)
        worst_row = std::max(worst_row, std::abs(A.A.row(i).sum() - 1.0));
    std::printf("A row-sum defect = %.3e\n", worst_row);

    const IteratedKernelMatrix C = assemble_iterated_matrix(mesh, rule);
    worst_row = 0.0;
    for (int i = 0; i < mesh->panel_count(); ++i)
        worst_row = std::max(worst_row, std::abs(C.C.row(i).sum() - 1.0));
    std::printf("C row-sum defect = %.3e\n", worst_row);

    const auto f2 = [](double) { return 2.0; };
    const MeshQuadrature mq = build_mesh_quadrature(mesh, rule);
    const PiecewiseConstant pf = project(mq, f2);
    const PiecewiseConstant gal = solve_galerkin(A, pf);
    double gal_err = 0.0;
    for (double c : gal.coeffs) gal_err = std::max(gal_err, std::abs(c - 1.0));
    std::printf("galerkin f=2 defect = %.3e\n", gal_err);

    const CompositeDensity cd = solve_modified(A, C, mesh, f2, rule);
    double y_err = 0.0;
    for (double c : cd.y.coeffs) y_err = std::max(y_err, std::abs(c - 1.0));
    std::printf("modified y defect = %.3e, z(0.37) = %.3e, u(0.37) = %.17g\n", y_err, cd.z(0.37),
                cd(0.37));

    const Density d = cd;
    std::printf("iterate(0.37) = %.17g\n", iterate(d, f2, 0.37));
    std::printf("potential(0.5,0.5) = %.17g\n", interior_potential(d, Vec2{0.5, 0.5}));
    return 0;
}
