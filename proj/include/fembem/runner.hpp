#pragma once

#include "fembem/config.hpp"
#include "fembem/gmsh.hpp"
#include "fembem/post.hpp"

namespace fembem {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitSolver = 3,
  kExitIo = 4,
};

// Dense BEM blocks only: refuse surfaces beyond desk scale.
inline constexpr int kMaxBemEdges = 20000;

struct StepResult {
  SolveReport report;
  double l2_norm = 0, l2_error = 0;
  Vec3 average_B = Vec3::Zero();
  std::vector<double> ampere;
  VecX a, phi, alpha;
};

struct CaseResult {
  int exit_code = kExitOk;
  std::string message;
  std::vector<StepResult> steps;  // initial configuration + one per motion step
  double h = 0;
  int n_fem = 0, n_bem = 0;
};

namespace detail {

inline std::function<Vec3(const Vec3&)> loop_field(const CaseConfig& cfg, const TetMesh& mesh) {
  if (cfg.source != "loop") return nullptr;
  const LoopSource lp = cfg.loop;
  const double j0 = lp.current / lp.cross_section_area;
  // region membership is resolved per quadrature point through the tet it
  // belongs to; assemble_source samples per tet, so tag the region by a
  // captured lookup table instead
  return [lp, j0](const Vec3& x) -> Vec3 {
    Vec3 rel = x - lp.center;
    Vec3 az = lp.axis.normalized().cross(rel);
    double n = az.norm();
    if (n < 1e-14) return Vec3::Zero();
    return j0 * az / n;
  };
}

inline void attach_materials(TetMesh& mesh, const CaseConfig& cfg) {
  mesh.regions.clear();
  for (const auto& [tag, r] : cfg.regions) {
    Region reg;
    reg.mu_r = r.mu_r;
    reg.magnetization = r.magnetization;
    reg.current_density = r.current_density;
    mesh.regions[tag] = reg;
  }
}

inline std::function<Vec3(const Vec3&)> analytic_field(const CaseConfig& cfg) {
  if (cfg.analytic == "magnetized_sphere") {
    const double b = 2.0 * kMu0 / 3.0 * cfg.analytic_m0;
    return [b](const Vec3&) { return Vec3(0, 0, b); };
  }
  if (cfg.analytic == "uniform") {
    Vec3 B = cfg.analytic_B;
    return [B](const Vec3&) { return B; };
  }
  return nullptr;
}

inline void write_case_csv(const std::string& path, int level, double h, int n_fem, int n_bem,
                           const std::vector<StepResult>& steps) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "step,level,h,N_FEM,N_BEM,l2_norm,l2_error,iterations";
  std::size_t nloops = steps.empty() ? 0 : steps.front().ampere.size();
  for (std::size_t k = 0; k < nloops; ++k) out << ",ampere_" << k;
  out << "\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (std::size_t s = 0; s < steps.size(); ++s) {
    out << s << "," << level << "," << num(h) << "," << n_fem << "," << n_bem << ","
        << num(steps[s].l2_norm) << "," << num(steps[s].l2_error) << ","
        << steps[s].report.iterations;
    for (double av : steps[s].ampere) out << "," << num(av);
    out << "\n";
  }
}

inline void write_report_json(const std::string& path, const CaseResult& res) {
  json j;
  j["exit_code"] = res.exit_code;
  j["h"] = res.h;
  j["N_FEM"] = res.n_fem;
  j["N_BEM"] = res.n_bem;
  json steps = json::array();
  for (const auto& s : res.steps) {
    json sj;
    sj["iterations"] = s.report.iterations;
    sj["converged"] = s.report.converged;
    sj["residual_history"] = s.report.residual_history;
    sj["l2_norm"] = s.l2_norm;
    sj["l2_error"] = s.l2_error;
    sj["average_B"] = {s.average_B[0], s.average_B[1], s.average_B[2]};
    sj["ampere"] = s.ampere;
    json sec = json::object();
    for (const auto& [k, v] : s.report.seconds) sec[k] = v;
    sj["seconds"] = sec;
    steps.push_back(sj);
  }
  j["steps"] = steps;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace detail

// Solves one configuration (plus its motion script) and writes the
// artifacts. Exit codes: 0 ok, 2 config validation, 3 solver, 4 I/O.
inline CaseResult run_case(const CaseConfig& cfg, std::ostream& log, bool verbose = false,
                           int level = 0, const std::string& mesh_override = {}) {
  CaseResult res;
  namespace fs = std::filesystem;
  try {
    const std::string mesh_path = mesh_override.empty() ? cfg.mesh : mesh_override;
    auto mesh = std::make_shared<TetMesh>(load_msh(mesh_path));
    detail::attach_materials(*mesh, cfg);
    validate_config(cfg, *mesh);

    auto t_assemble = std::chrono::steady_clock::now();
    EdgeSpace es = make_edge_space(*mesh);
    res.n_fem = es.n_dofs;
    res.h = mesh->max_edge_length();

    SolverConfig scfg = cfg.solver;
    VecX f = assemble_source(es, *mesh, detail::loop_field(cfg, *mesh));
    bool has_current = cfg.source == "loop";
    for (const auto& [tag, r] : cfg.regions)
      if (r.current_density.norm() > 0) has_current = true;
    if (has_current) project_solenoidal(*mesh, f);

    if (cfg.write_vtk || cfg.write_csv) fs::create_directories(cfg.output_directory);

    if (cfg.fem_only) {
      // truncated-domain baseline: homogeneous Neumann walls, no BEM coupling
      SpMat A = assemble_curl_curl(es, *mesh);
      LinearOperator op{es.n_dofs, [&](const VecX& x, VecX& y) { y = A * x; }};
      // plain Jacobi on the shifted diagonal
      VecX diag = A.diagonal();
      for (int i = 0; i < diag.size(); ++i) diag[i] = 1.0 / ((1 + scfg.diagonal_shift) * diag[i]);
      LinearOperator pre{es.n_dofs, [&](const VecX& x, VecX& y) { y = diag.cwiseProduct(x); }};
      MinresResult r = minres(op, pre, f, scfg);
      StepResult st;
      st.report = r.report;
      auto B = interior_B(r.x, *mesh);
      st.l2_norm = l2_norm_B(B, *mesh);
      auto exact = detail::analytic_field(cfg);
      st.l2_error = exact ? l2_error_B(B, *mesh, exact) : 0.0;
      st.average_B = volume_average_B(B, *mesh);
      st.a = r.x;
      res.steps.push_back(std::move(st));
      if (!r.report.converged) {
        res.exit_code = kExitSolver;
        res.message = "solver did not converge";
        return res;
      }
      if (cfg.write_csv)
        detail::write_case_csv(cfg.output_directory + "/case.csv", level, res.h, res.n_fem, 0,
                               res.steps);
      detail::write_report_json(cfg.output_directory + "/report.json", res);
      if (cfg.write_vtk) export_vtk(*mesh, B, cfg.output_directory + "/step0.vtk");
      return res;
    }

    CoupledSystem sys = assemble_system(mesh);
    if (sys.surf->n_edges() > kMaxBemEdges)
      throw ConfigError("surface exceeds the dense-BEM limit of " +
                        std::to_string(kMaxBemEdges) + " edges (compression is out of scope)");
    res.n_bem = sys.surf->n_vertices();
    std::vector<CurrentSheet> sheets;
    for (const auto& cyc : cfg.cycles)
      sheets.push_back(build_current_sheet(*sys.surf, mesh->nodes, cyc));
    if (!sheets.empty()) sys = augment_system(sys, sheets);
    auto P = build_preconditioner(sys, scfg);
    if (verbose)
      log << "assembled: N_FEM=" << res.n_fem << " N_phi=" << sys.n_phi
          << " sheets=" << sys.n_sheets() << "\n";
    double assemble_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_assemble).count();

    auto postprocess = [&](const CoupledSystem& s, const SystemSolution& sol, StepResult& st) {
      auto B = interior_B(sol.a, *s.mesh);
      st.l2_norm = l2_norm_B(B, *s.mesh);
      auto exact = detail::analytic_field(cfg);
      st.l2_error = exact ? l2_error_B(B, *s.mesh, exact) : 0.0;
      st.average_B = volume_average_B(B, *s.mesh);
      VecX t = s.R * sol.a;
      VecX lam = s.G * sol.phi;
      for (int m = 0; m < s.n_sheets(); ++m) lam += sol.alpha[m] * s.sheets[m].eta;
      for (const auto& lspec : cfg.ampere_loops) {
        auto loop = circle_loop(lspec.center, lspec.axis, lspec.radius, lspec.samples);
        st.ampere.push_back(ampere_loop(*s.surf, s.mesh->nodes, t, lam, loop));
      }
      return B;
    };

    // initial configuration
    SystemSolution sol = solve_system(sys, P, f, scfg);
    sol.report.seconds["assemble"] = assemble_seconds;
    {
      StepResult st;
      st.report = sol.report;
      auto B = postprocess(sys, sol, st);
      st.a = sol.a;
      st.phi = sol.phi;
      st.alpha = sol.alpha;
      res.steps.push_back(st);
      if (cfg.write_vtk) {
        export_vtk(*sys.mesh, B, cfg.output_directory + "/step0.vtk");
        export_vtk_surface(*sys.surf, sys.mesh->nodes, sol.phi,
                           cfg.output_directory + "/step0_phi.vtk");
      }
    }
    if (!sol.report.converged) {
      res.exit_code = kExitSolver;
      res.message = "solver did not converge";
      detail::write_report_json(cfg.output_directory + "/report.json", res);
      return res;
    }

    // motion script: block updates, reused preconditioner, warm starts
    CoupledSystem current = sys;
    for (std::size_t step = 0; step < cfg.motion.size(); ++step) {
      current = apply_motion(current, cfg.motion[step].to_motion());
      SolverConfig warm = scfg;
      if (cfg.warm_start) {
        VecX x0(current.n_sheets() > 0 ? current.dim_extended() : current.dim());
        x0.head(current.n_fem) = res.steps.back().a;
        x0.segment(current.n_fem, current.n_phi) = res.steps.back().phi;
        if (current.n_sheets() > 0) x0.tail(current.n_sheets()) = res.steps.back().alpha;
        warm.initial_guess = x0;
      }
      SystemSolution msol = solve_system(current, P, f, warm);
      StepResult st;
      st.report = msol.report;
      auto B = postprocess(current, msol, st);
      st.a = msol.a;
      st.phi = msol.phi;
      st.alpha = msol.alpha;
      res.steps.push_back(st);
      if (cfg.write_vtk)
        export_vtk(*current.mesh, B,
                   cfg.output_directory + "/step" + std::to_string(step + 1) + ".vtk");
      if (!msol.report.converged) {
        res.exit_code = kExitSolver;
        res.message = "solver did not converge (motion step " + std::to_string(step + 1) + ")";
        return res;
      }
    }

    if (cfg.write_csv)
      detail::write_case_csv(cfg.output_directory + "/case.csv", level, res.h, res.n_fem,
                             res.n_bem, res.steps);
    detail::write_report_json(cfg.output_directory + "/report.json", res);
  } catch (const ConfigError& e) {
    res.exit_code = kExitConfig;
    res.message = e.what();
  } catch (const CycleError& e) {
    res.exit_code = kExitConfig;
    res.message = e.what();
  } catch (const MeshError& e) {
    res.exit_code = kExitConfig;
    res.message = e.what();
  } catch (const IoError& e) {
    res.exit_code = kExitIo;
    res.message = e.what();
  }
  if (res.exit_code != kExitOk) log << "error: " << res.message << "\n";
  return res;
}

struct StudyRow {
  int level;
  double h;
  int n_fem, n_bem;
  double l2_norm, l2_error;
  int iterations;
  double seconds;
  double mu_r = 1.0;
};

struct StudyResult {
  int exit_code = kExitOk;
  std::string message;
  std::vector<StudyRow> rows;
  bool monotone = true;
};

// Convergence study over nested mesh levels (or a permeability sweep).
// Refuses to report convergence unless the error column is monotone
// decreasing; the warning is a flagged column, not a failure.
inline StudyResult convergence_study(const CaseConfig& cfg, std::ostream& log,
                                     bool verbose = false) {
  StudyResult res;
  try {
    if (cfg.study.meshes.size() < 2)
      throw ConfigError("a study needs at least two mesh levels");
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_directory);

    if (cfg.study.mode == "convergence") {
      for (std::size_t lvl = 0; lvl < cfg.study.meshes.size(); ++lvl) {
        CaseConfig c = cfg;
        c.write_vtk = cfg.write_vtk;
        c.output_directory = cfg.output_directory + "/L" + std::to_string(lvl + 1);
        auto t0 = std::chrono::steady_clock::now();
        CaseResult r = run_case(c, log, verbose, static_cast<int>(lvl + 1),
                                cfg.study.meshes[lvl]);
        if (r.exit_code != kExitOk) {
          res.exit_code = r.exit_code;
          res.message = r.message;
          return res;
        }
        StudyRow row;
        row.level = static_cast<int>(lvl + 1);
        row.h = r.h;
        row.n_fem = r.n_fem;
        row.n_bem = r.n_bem;
        row.l2_norm = r.steps.front().l2_norm;
        row.l2_error = r.steps.front().l2_error;
        row.iterations = r.steps.front().report.iterations;
        row.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.rows.push_back(row);
        if (verbose)
          log << "L" << row.level << ": h=" << row.h << " l2_error=" << row.l2_error << "\n";
      }
      for (std::size_t i = 1; i < res.rows.size(); ++i)
        if (res.rows[i].l2_error >= res.rows[i - 1].l2_error) res.monotone = false;
      if (!res.monotone) log << "warning: error column is not monotone decreasing\n";
      std::ofstream out(cfg.output_directory + "/convergence.csv");
      if (!out) throw IoError("cannot write the study table");
      out << "level,h,N_FEM,N_BEM,l2_norm,l2_error,iterations,seconds,warning\n";
      char buf[64];
      auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
      };
      for (const auto& r : res.rows)
        out << r.level << "," << num(r.h) << "," << r.n_fem << "," << r.n_bem << ","
            << num(r.l2_norm) << "," << num(r.l2_error) << "," << r.iterations << ","
            << num(r.seconds) << "," << (res.monotone ? "" : "non-monotone") << "\n";
    } else if (cfg.study.mode == "mu_sweep") {
      if (cfg.study.mu_values.empty()) throw ConfigError("mu_sweep needs mu_values");
      // iteration table: one row per permeability, one column per level
      std::vector<std::vector<int>> iters(cfg.study.mu_values.size());
      for (std::size_t mi = 0; mi < cfg.study.mu_values.size(); ++mi) {
        for (std::size_t lvl = 0; lvl < cfg.study.meshes.size(); ++lvl) {
          CaseConfig c = cfg;
          c.regions[cfg.study.sweep_region].mu_r = cfg.study.mu_values[mi];
          c.write_vtk = false;
          c.write_csv = false;
          c.output_directory = cfg.output_directory;
          CaseResult r = run_case(c, log, verbose, static_cast<int>(lvl + 1),
                                  cfg.study.meshes[lvl]);
          if (r.exit_code != kExitOk) {
            res.exit_code = r.exit_code;
            res.message = r.message;
            return res;
          }
          StudyRow row;
          row.level = static_cast<int>(lvl + 1);
          row.mu_r = cfg.study.mu_values[mi];
          row.h = r.h;
          row.n_fem = r.n_fem;
          row.n_bem = r.n_bem;
          row.iterations = r.steps.front().report.iterations;
          row.l2_norm = r.steps.front().l2_norm;
          row.l2_error = r.steps.front().l2_error;
          row.seconds = 0;
          res.rows.push_back(row);
          iters[mi].push_back(row.iterations);
        }
      }
      std::ofstream out(cfg.output_directory + "/iterations.csv");
      if (!out) throw IoError("cannot write the iteration table");
      out << "mu_r";
      for (std::size_t lvl = 0; lvl < cfg.study.meshes.size(); ++lvl)
        out << ",L" << (lvl + 1);
      out << "\n";
      for (std::size_t mi = 0; mi < cfg.study.mu_values.size(); ++mi) {
        out << cfg.study.mu_values[mi];
        for (int it : iters[mi]) out << "," << it;
        out << "\n";
      }
    } else {
      throw ConfigError("unknown study mode '" + cfg.study.mode + "'");
    }
  } catch (const ConfigError& e) {
    res.exit_code = kExitConfig;
    res.message = e.what();
  } catch (const IoError& e) {
    res.exit_code = kExitIo;
    res.message = e.what();
  }
  if (res.exit_code != kExitOk) log << "error: " << res.message << "\n";
  return res;
}

}  // namespace fembem
