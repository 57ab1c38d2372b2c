#include <chrono>
#include <cstdio>

#include "cornerbie/cornerbie.hpp"

using namespace cornerbie;

int main(int argc, char** argv) {
    const int max_n = argc > 1 ? std::atoi(argv[1]) : 32;
    const Polygon square = build_polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    const PartitionSpec part = default_partition(square);
    const Problem prob = make_manufactured(square, part, Profile::smooth, 1e-12);
    const QuadratureRule rule = gauss_rule(10);

    for (int order : {2, 4}) {
        std::printf("== grading auto:%d -> q = %g\n", order,
                    recommend_grading(square, order)[0]);
        std::vector<double> e_gal, e_igal, e_mod, e_imod;
        for (int n = 8; n <= max_n; n *= 2) {
            GradedMeshSpec spec;
            spec.n = {n, n, n, n};
            spec.q = recommend_grading(square, order);
            const MeshPtr mesh = share_mesh(build_graded_mesh(square, part, spec));
            const auto t0 = std::chrono::steady_clock::now();
            const auto runs =
                run_methods(prob, mesh,
                            {Method::galerkin, Method::iterated_galerkin, Method::modified,
                             Method::iterated_modified},
                            rule);
            const double dt = std::chrono::duration<double>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
            e_gal.push_back(runs[0].sup_error);
            e_igal.push_back(runs[1].sup_error);
            e_mod.push_back(runs[2].sup_error);
            e_imod.push_back(runs[3].sup_error);
            std::printf(
                "n=%3d  gal %.3e  igal %.3e  mod %.3e  imod %.3e   (%.1fs)\n", n,
                runs[0].sup_error, runs[1].sup_error, runs[2].sup_error, runs[3].sup_error, dt);
        }
        auto print_eoc = [](const char* name, const std::vector<double>& e) {
            if (e.size() < 2) return;
            std::printf("%s eoc:", name);
            for (double v : eoc(e)) std::printf(" %.2f", v);
            std::printf("\n");
        };
        print_eoc("gal ", e_gal);
        print_eoc("igal", e_igal);
        print_eoc("mod ", e_mod);
        print_eoc("imod", e_imod);
    }
    return 0;
}
