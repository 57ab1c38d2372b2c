#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cornerbie/errors.hpp"
#include "cornerbie/harness.hpp"

namespace cornerbie {

inline const char* artifact_version() { return "0.1.0"; }

struct RunConfig {
    std::vector<Vec2> vertices;
    std::optional<std::vector<double>> partition;
    bool grading_auto = true;
    int grading_order = 4;
    std::vector<double> grading_q;  // explicit grading when !grading_auto
    std::vector<int> n;
    int levels = 1;
    std::vector<std::string> methods;
    int extrapolation_p = 2;
    std::string extrapolation_base = "iterated_modified";
    bool problem_harmonic = false;
    Profile profile = Profile::smooth;
    Vec2 x_ext{3.0, 3.0};
    std::vector<Vec2> checkpoints;
    int quadrature_order = 10;
    double oracle_tol = 1e-12;
    std::string output_dir = "out";
    int parallelism = 1;
};

namespace detail {

inline Vec2 parse_point(const nlohmann::json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ValidationError(field + ": expected [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline std::string fmt_sci(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.11e", v);
    return buf;
}

inline std::string fmt_n_spec(const std::vector<int>& n) {
    std::string out;
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (i) out += "|";
        out += std::to_string(n[i]);
    }
    return out;
}

inline Method method_from_string(const std::string& s) {
    if (s == "galerkin") return Method::galerkin;
    if (s == "iterated_galerkin") return Method::iterated_galerkin;
    if (s == "modified") return Method::modified;
    if (s == "iterated_modified") return Method::iterated_modified;
    throw ValidationError("methods: unknown method '" + s + "'");
}

// Runs jobs 0..count-1 with at most `parallelism` in flight; results land in
// caller-owned slots, so output order never depends on scheduling.
template <class Fn>
void run_jobs(int count, int parallelism, Fn&& job) {
    if (parallelism <= 1) {
        for (int i = 0; i < count; ++i) job(i);
        return;
    }
    for (int start = 0; start < count; start += parallelism) {
        std::vector<std::future<void>> wave;
        const int end = std::min(count, start + parallelism);
        for (int i = start; i < end; ++i)
            wave.push_back(std::async(std::launch::async, [&job, i] { job(i); }));
        for (auto& f : wave) f.get();
    }
}

}  // namespace detail

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("config root must be a JSON object");

    RunConfig cfg;
    if (!j.contains("vertices") || !j["vertices"].is_array() || j["vertices"].size() < 3)
        throw ValidationError("vertices: expected an array of at least 3 [x, y] pairs");
    for (const auto& v : j["vertices"]) cfg.vertices.push_back(detail::parse_point(v, "vertices"));
    const int r = static_cast<int>(cfg.vertices.size());

    if (!j.contains("n") || !j["n"].is_array())
        throw ValidationError("n: expected an array of per-segment interval counts");
    for (const auto& v : j["n"]) {
        if (!v.is_number_integer() || v.get<int>() < 1)
            throw ValidationError("n: entries must be integers >= 1");
        cfg.n.push_back(v.get<int>());
    }
    if (static_cast<int>(cfg.n.size()) != r)
        throw ValidationError("n: expected " + std::to_string(r) + " entries");

    if (j.contains("partition")) {
        std::vector<double> gamma;
        for (const auto& v : j["partition"]) {
            if (!v.is_number()) throw ValidationError("partition: entries must be numbers");
            gamma.push_back(v.get<double>());
        }
        if (static_cast<int>(gamma.size()) != r)
            throw ValidationError("partition: expected " + std::to_string(r) + " entries");
        cfg.partition = std::move(gamma);
    }

    if (j.contains("grading")) {
        const auto& g = j["grading"];
        if (g.is_string()) {
            const std::string s = g.get<std::string>();
            if (s == "auto:2") cfg.grading_order = 2;
            else if (s == "auto:4") cfg.grading_order = 4;
            else throw ValidationError("grading: expected \"auto:2\", \"auto:4\", or a q list");
        } else if (g.is_array()) {
            cfg.grading_auto = false;
            for (const auto& v : g) {
                if (!v.is_number()) throw ValidationError("grading: q entries must be numbers");
                const double q = v.get<double>();
                if (q < 1.0)
                    throw ValidationError("grading: exponents must satisfy q_j >= 1, got " +
                                          std::to_string(q));
                cfg.grading_q.push_back(q);
            }
            if (static_cast<int>(cfg.grading_q.size()) != r)
                throw ValidationError("grading: expected " + std::to_string(r) + " entries");
        } else {
            throw ValidationError("grading: expected a string or an array");
        }
    }

    if (j.contains("levels")) {
        if (!j["levels"].is_number_integer() || j["levels"].get<int>() < 1)
            throw ValidationError("levels: must be an integer >= 1");
        cfg.levels = j["levels"].get<int>();
    }

    if (!j.contains("methods") || !j["methods"].is_array() || j["methods"].empty())
        throw ValidationError("methods: expected a nonempty array");
    for (const auto& v : j["methods"]) {
        const std::string s = v.get<std::string>();
        if (s != "extrapolated") detail::method_from_string(s);  // validates
        cfg.methods.push_back(s);
    }

    if (j.contains("extrapolation_p")) {
        const int p = j["extrapolation_p"].get<int>();
        if (p != 2 && p != 4) throw ValidationError("extrapolation_p: must be 2 or 4");
        cfg.extrapolation_p = p;
    }
    if (j.contains("extrapolation_base")) {
        const std::string s = j["extrapolation_base"].get<std::string>();
        if (s != "iterated_galerkin" && s != "iterated_modified")
            throw ValidationError("extrapolation_base: must be an iterated method");
        cfg.extrapolation_base = s;
    }

    if (!j.contains("problem") || !j["problem"].is_object())
        throw ValidationError("problem: expected an object");
    const auto& prob = j["problem"];
    if (prob.contains("manufactured")) {
        const std::string s = prob["manufactured"].get<std::string>();
        if (s == "smooth") cfg.profile = Profile::smooth;
        else if (s == "corner_singular") cfg.profile = Profile::corner_singular;
        else throw ValidationError("problem.manufactured: expected \"smooth\" or \"corner_singular\"");
    } else if (prob.contains("harmonic")) {
        cfg.problem_harmonic = true;
        const auto& h = prob["harmonic"];
        if (!h.contains("x_ext")) throw ValidationError("problem.harmonic.x_ext: required");
        cfg.x_ext = detail::parse_point(h["x_ext"], "problem.harmonic.x_ext");
        if (!h.contains("checkpoints") || !h["checkpoints"].is_array() || h["checkpoints"].empty())
            throw ValidationError("problem.harmonic.checkpoints: expected a nonempty array");
        for (const auto& c : h["checkpoints"])
            cfg.checkpoints.push_back(detail::parse_point(c, "problem.harmonic.checkpoints"));
    } else {
        throw ValidationError("problem: expected \"manufactured\" or \"harmonic\"");
    }

    if (j.contains("quadrature_order")) {
        const int g = j["quadrature_order"].get<int>();
        if (g < 1 || g > 64) throw ValidationError("quadrature_order: must be in [1, 64]");
        cfg.quadrature_order = g;
    }
    if (j.contains("oracle_tol")) {
        const double t = j["oracle_tol"].get<double>();
        if (!(t >= 1e-13)) throw ValidationError("oracle_tol: must be >= 1e-13");
        cfg.oracle_tol = t;
    }
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("parallelism")) {
        const int p = j["parallelism"].get<int>();
        if (p < 1) throw ValidationError("parallelism: must be >= 1");
        cfg.parallelism = p;
    }
    return cfg;
}

namespace detail {

struct PreparedRun {
    Polygon polygon;
    PartitionSpec partition;
    Problem problem;
    GradedMeshSpec base_spec;
    QuadratureRule rule;
};

inline PreparedRun prepare(const RunConfig& cfg) {
    PreparedRun out;
    out.polygon = build_polygon(cfg.vertices);
    out.partition =
        cfg.partition ? PartitionSpec{*cfg.partition} : default_partition(out.polygon);
    validate_partition(out.polygon, out.partition);
    if (cfg.problem_harmonic)
        out.problem = make_harmonic(out.polygon, out.partition, cfg.x_ext, cfg.checkpoints);
    else
        out.problem = make_manufactured(out.polygon, out.partition, cfg.profile, cfg.oracle_tol);
    out.base_spec.n = cfg.n;
    out.base_spec.q =
        cfg.grading_auto ? recommend_grading(out.polygon, cfg.grading_order) : cfg.grading_q;
    out.rule = gauss_rule(cfg.quadrature_order);
    return out;
}

inline GradedMeshSpec spec_at_level(const GradedMeshSpec& base, int level) {
    GradedMeshSpec spec = base;
    for (int& n : spec.n) n <<= level;
    return spec;
}

inline nlohmann::json config_json(const RunConfig& cfg) {
    nlohmann::json j;
    nlohmann::json verts = nlohmann::json::array();
    for (const Vec2& v : cfg.vertices) verts.push_back({v.x, v.y});
    j["vertices"] = verts;
    if (cfg.partition) j["partition"] = *cfg.partition;
    if (cfg.grading_auto) j["grading"] = "auto:" + std::to_string(cfg.grading_order);
    else j["grading"] = cfg.grading_q;
    j["n"] = cfg.n;
    j["levels"] = cfg.levels;
    j["methods"] = cfg.methods;
    j["extrapolation_p"] = cfg.extrapolation_p;
    j["extrapolation_base"] = cfg.extrapolation_base;
    if (cfg.problem_harmonic) {
        nlohmann::json cps = nlohmann::json::array();
        for (const Vec2& c : cfg.checkpoints) cps.push_back({c.x, c.y});
        j["problem"] = {{"harmonic", {{"x_ext", {cfg.x_ext.x, cfg.x_ext.y}}, {"checkpoints", cps}}}};
    } else {
        j["problem"] = {
            {"manufactured", cfg.profile == Profile::smooth ? "smooth" : "corner_singular"}};
    }
    j["quadrature_order"] = cfg.quadrature_order;
    j["oracle_tol"] = cfg.oracle_tol;
    j["output_dir"] = cfg.output_dir;
    j["parallelism"] = cfg.parallelism;
    return j;
}

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    out << contents;
}

inline void write_report_json(const RunConfig& cfg, const std::string& command,
                              const std::vector<std::string>& outputs, int rows) {
    nlohmann::json j;
    j["version"] = artifact_version();
    j["command"] = command;
    j["config"] = config_json(cfg);
    j["outputs"] = outputs;
    j["rows"] = rows;
    j["seed"] = 0;
    write_file(std::filesystem::path(cfg.output_dir) / "report.json", j.dump(2) + "\n");
}

}  // namespace detail

// Runs every requested method over the level ladder (all n_j doubled per
// level) and writes convergence.csv plus report.json.
inline int cmd_convergence(const RunConfig& cfg) {
    try {
        const detail::PreparedRun run = detail::prepare(cfg);
        std::filesystem::create_directories(cfg.output_dir);

        std::vector<Method> plain_methods;
        bool with_extrapolated = false;
        for (const std::string& m : cfg.methods) {
            if (m == "extrapolated") with_extrapolated = true;
            else plain_methods.push_back(detail::method_from_string(m));
        }
        const Method extrap_base = detail::method_from_string(cfg.extrapolation_base);

        std::vector<std::vector<MethodRun>> level_runs(cfg.levels);
        std::vector<std::optional<ExtrapolationRun>> level_extrap(cfg.levels);
        detail::run_jobs(cfg.levels, cfg.parallelism, [&](int level) {
            const GradedMeshSpec spec = detail::spec_at_level(run.base_spec, level);
            if (!plain_methods.empty()) {
                const MeshPtr mesh =
                    share_mesh(build_graded_mesh(run.polygon, run.partition, spec));
                level_runs[level] = run_methods(run.problem, mesh, plain_methods, run.rule);
            }
            if (with_extrapolated)
                level_extrap[level] =
                    extrapolate(run.problem, spec, extrap_base, cfg.extrapolation_p, run.rule);
        });

        std::ostringstream csv;
        csv << "level,n_spec,h_max,panels,method,sup_error,eoc\n";
        int rows = 0;
        for (const std::string& name : cfg.methods) {
            std::vector<double> errors;
            for (int level = 0; level < cfg.levels; ++level) {
                const GradedMeshSpec spec = detail::spec_at_level(run.base_spec, level);
                double err = 0.0;
                int panels = 0;
                double h_max = 0.0;
                if (name == "extrapolated") {
                    err = level_extrap[level]->extrapolated_sup_error;
                    panels = 0;
                    for (int nj : spec.n) panels += 2 * nj;
                    h_max = 0.0;
                    for (int nj : spec.n) h_max = std::max(h_max, 1.0 / nj);
                } else {
                    const Method m = detail::method_from_string(name);
                    for (const MethodRun& mr : level_runs[level]) {
                        if (mr.method == m) err = mr.sup_error;
                    }
                    panels = 0;
                    for (int nj : spec.n) panels += 2 * nj;
                    h_max = 0.0;
                    for (int nj : spec.n) h_max = std::max(h_max, 1.0 / nj);
                }
                errors.push_back(err);
                csv << level << "," << detail::fmt_n_spec(spec.n) << "," << detail::fmt_sci(h_max)
                    << "," << panels << "," << name << "," << detail::fmt_sci(err) << ",";
                if (level > 0 && errors[level - 1] > 0.0 && err > 0.0)
                    csv << detail::fmt_sci(std::log2(errors[level - 1] / err));
                csv << "\n";
                ++rows;
            }
        }
        detail::write_file(std::filesystem::path(cfg.output_dir) / "convergence.csv", csv.str());
        detail::write_report_json(cfg, "convergence", {"convergence.csv"}, rows);
        return 0;
    } catch (const ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 2;
    }
}

// Base + r refined solves per level; writes extrapolation.csv with both error
// series, their EOCs, and the combination coefficients used.
inline int cmd_extrapolate(const RunConfig& cfg) {
    try {
        const bool has_tag = std::find(cfg.methods.begin(), cfg.methods.end(), "extrapolated") !=
                             cfg.methods.end();
        if (!has_tag)
            throw ValidationError("methods: extrapolate command requires the \"extrapolated\" method");
        const detail::PreparedRun run = detail::prepare(cfg);
        std::filesystem::create_directories(cfg.output_dir);
        const Method base_method = detail::method_from_string(cfg.extrapolation_base);

        std::vector<std::optional<ExtrapolationRun>> results(cfg.levels);
        detail::run_jobs(cfg.levels, cfg.parallelism, [&](int level) {
            const GradedMeshSpec spec = detail::spec_at_level(run.base_spec, level);
            results[level] =
                extrapolate(run.problem, spec, base_method, cfg.extrapolation_p, run.rule);
        });

        std::ostringstream csv;
        csv << "level,n_spec,h_max,panels,method,p,c_fine,c_base,base_sup_error,"
               "extrapolated_sup_error,base_eoc,extrapolated_eoc\n";
        int rows = 0;
        for (int level = 0; level < cfg.levels; ++level) {
            const GradedMeshSpec spec = detail::spec_at_level(run.base_spec, level);
            int panels = 0;
            double h_max = 0.0;
            for (int nj : spec.n) {
                panels += 2 * nj;
                h_max = std::max(h_max, 1.0 / nj);
            }
            const ExtrapolationRun& er = *results[level];
            csv << level << "," << detail::fmt_n_spec(spec.n) << "," << detail::fmt_sci(h_max)
                << "," << panels << "," << cfg.extrapolation_base << "," << cfg.extrapolation_p
                << "," << er.c_fine.str() << "," << er.c_base.str() << ","
                << detail::fmt_sci(er.base.sup_error) << ","
                << detail::fmt_sci(er.extrapolated_sup_error) << ",";
            if (level > 0) {
                const ExtrapolationRun& prev = *results[level - 1];
                csv << detail::fmt_sci(std::log2(prev.base.sup_error / er.base.sup_error)) << ","
                    << detail::fmt_sci(
                           std::log2(prev.extrapolated_sup_error / er.extrapolated_sup_error));
            } else {
                csv << ",";
            }
            csv << "\n";
            ++rows;
        }
        detail::write_file(std::filesystem::path(cfg.output_dir) / "extrapolation.csv", csv.str());
        detail::write_report_json(cfg, "extrapolate", {"extrapolation.csv"}, rows);
        return 0;
    } catch (const ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 2;
    }
}

// Operator-decay diagnostics ladder; writes diagnostics.csv.
inline int cmd_diagnostics(const RunConfig& cfg) {
    try {
        if (cfg.problem_harmonic) {
            std::cerr << "diagnostics require manufactured u_exact\n";
            return 1;
        }
        const detail::PreparedRun run = detail::prepare(cfg);
        std::filesystem::create_directories(cfg.output_dir);

        std::vector<GradedMeshSpec> specs;
        for (int level = 0; level < cfg.levels; ++level)
            specs.push_back(detail::spec_at_level(run.base_spec, level));
        const std::vector<DiagnosticsRow> diag =
            operator_diagnostics(run.problem, specs, run.rule);

        std::ostringstream csv;
        csv << "level,n_spec,h_max,panels,diagnostic,value,eoc\n";
        int rows = 0;
        for (const char* series : {"t_defect_single", "t_defect_double"}) {
            std::vector<double> values;
            for (int level = 0; level < cfg.levels; ++level) {
                const DiagnosticsRow& dr = diag[level];
                const double v = std::string(series) == "t_defect_single" ? dr.defect_single
                                                                          : dr.defect_double;
                values.push_back(v);
                csv << level << "," << detail::fmt_n_spec(dr.spec.n) << ","
                    << detail::fmt_sci(dr.h_max) << "," << dr.panels << "," << series << ","
                    << detail::fmt_sci(v) << ",";
                if (level > 0 && values[level - 1] > 0.0 && v > 0.0)
                    csv << detail::fmt_sci(std::log2(values[level - 1] / v));
                csv << "\n";
                ++rows;
            }
        }
        detail::write_file(std::filesystem::path(cfg.output_dir) / "diagnostics.csv", csv.str());
        detail::write_report_json(cfg, "diagnostics", {"diagnostics.csv"}, rows);
        return 0;
    } catch (const ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace cornerbie
