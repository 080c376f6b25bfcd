// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Fixtures are generated into a scratch directory; the CLI binary is
// exercised for the external interfaces.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fembem/circulant.hpp"
#include "fembem/fixtures.hpp"
#include "fembem/gmsh.hpp"
#include "fembem/post.hpp"
#include "fembem/runner.hpp"
#include "fembem/solver.hpp"
#include "support/oracles.hpp"

using namespace fembem;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s  (%s)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void report_extra(const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] interface  : %s  (%s)\n", pass ? "PASS" : "FAIL", name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list va;
  va_start(va, f);
  std::vsnprintf(buf, sizeof buf, f, va);
  va_end(va);
  return buf;
}

struct SphereLevel {
  int n;
  std::shared_ptr<TetMesh> mesh;
  CoupledSystem sys;
  SystemSolution sol;
  double norm_over_mu0 = 0, l2_error = 0, seconds = 0;
};

SphereLevel solve_sphere_level(int n) {
  SphereLevel lv;
  lv.n = n;
  auto t0 = std::chrono::steady_clock::now();
  lv.mesh = std::make_shared<TetMesh>(make_ball(n));
  lv.mesh->regions[1].magnetization = Vec3(0, 0, 1);
  lv.sys = assemble_system(lv.mesh);
  EdgeSpace es = make_edge_space(*lv.mesh);
  VecX f = assemble_source(es, *lv.mesh);
  SolverConfig cfg;
  cfg.tolerance = 1e-8;
  cfg.max_iterations = 8000;
  auto P = build_preconditioner(lv.sys, cfg);
  lv.sol = solve_system(lv.sys, P, f, cfg);
  auto B = interior_B(lv.sol.a, *lv.mesh);
  lv.norm_over_mu0 = l2_norm_B(B, *lv.mesh) / kMu0;
  lv.l2_error = l2_error_B(B, *lv.mesh,
                           [](const Vec3&) { return Vec3(0, 0, 2.0 * kMu0 / 3.0); });
  lv.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return lv;
}

double symmetry_defect(const CoupledSystem& sys, bool extended) {
  MatX S = sys.to_dense(extended);
  return (S - S.transpose()).cwiseAbs().maxCoeff() / S.cwiseAbs().maxCoeff();
}

bool integer_dg_zero(const SurfaceMesh& s) {
  SpMat G = topological_gradient(s);
  for (int t = 0; t < s.n_tris(); ++t)
    for (int k = 0; k < s.n_vertices(); ++k) {
      long sum = 0;
      for (int l = 0; l < 3; ++l)
        sum += long(s.tri_edge_sign[t][l]) * std::lround(G.coeff(s.tri_edge[t][l], k));
      if (sum != 0) return false;
    }
  return true;
}

struct TorusSolve {
  std::shared_ptr<TetMesh> mesh;
  CoupledSystem sys;
  SystemSolution sol;
};

TorusSolve solve_torus_current(const TorusFixture& fx, double mu, bool with_sheet,
                               double tol = 1e-8) {
  TorusSolve ts;
  ts.mesh = std::make_shared<TetMesh>(fx.mesh);
  ts.mesh->regions[1].mu_r = mu;
  ts.sys = assemble_system(ts.mesh);
  if (with_sheet) {
    CurrentSheet sheet = build_current_sheet(*ts.sys.surf, ts.mesh->nodes, fx.toroidal_cycle);
    ts.sys = augment_system(ts.sys, {sheet});
  }
  EdgeSpace es = make_edge_space(*ts.mesh);
  const double area = fx.side * fx.side;
  auto jf = [&](const Vec3& x) -> Vec3 {
    Vec3 az = Vec3(0, 0, 1).cross(x);
    double n = az.norm();
    return n < 1e-14 ? Vec3::Zero() : Vec3(az / n / area);
  };
  VecX f = assemble_source(es, *ts.mesh, jf);
  project_solenoidal(*ts.mesh, f);
  if (!with_sheet) {
    // a net current is incompatible with the gauged (un-augmented) scheme:
    // the harmonic kernel direction carries f^T h != 0. Solve the compatible
    // part, which is exactly the violated-Ampere solution the control needs.
    VecX h = torus_harmonic_edge_field(*ts.mesh);
    VecX htilde = h;
    project_solenoidal(*ts.mesh, htilde);  // orthogonalize against gradients
    f -= (f.dot(htilde) / htilde.squaredNorm()) * htilde;
  }
  SolverConfig cfg;
  cfg.tolerance = tol;
  cfg.max_iterations = 8000;
  auto P = build_preconditioner(ts.sys, cfg);
  ts.sol = solve_system(ts.sys, P, f, cfg);
  return ts;
}

double torus_linking_integral(const TorusSolve& ts, const TorusFixture& fx) {
  VecX t = ts.sys.R * ts.sol.a;
  VecX lam = ts.sys.G * ts.sol.phi;
  for (int m = 0; m < ts.sys.n_sheets(); ++m) lam += ts.sol.alpha[m] * ts.sys.sheets[m].eta;
  // poloidal circle in the x-z plane around the tube, outside the core
  std::vector<Vec3> loop;
  const int nsamp = 256;
  const double r = 1.1 * fx.side;
  for (int i = 0; i < nsamp; ++i) {
    double th = -2.0 * kPi * i / nsamp;  // right-handed about the +e_phi current
    loop.push_back(Vec3(fx.major_radius + r * std::cos(th), 0, r * std::sin(th)));
  }
  return ampere_loop(*ts.sys.surf, ts.mesh->nodes, t, lam, loop);
}

// scalar trace-oracle contraction helpers (coarse sphere)
struct OracleSphere {
  TetMesh mesh;
  SurfaceMesh surf;
  std::vector<TriData> tris;
  SpMat G;
  OracleSphere() : mesh(make_ball(2)), surf(extract_boundary(mesh)) {
    tris = build_tri_data(surf, mesh.nodes);
    G = topological_gradient(surf);
  }
};

template <class TestF, class PotF>
double trace_oracle(const OracleSphere& sp, const std::vector<int>& panels, TestF&& test,
                    PotF&& pot, double eps0, int subdiv0) {
  double by_subdiv[2];
  for (int si = 0; si < 2; ++si) {
    const int nsub = subdiv0 * (si + 1);
    double vals[3];
    for (int k = 0; k < 3; ++k) {
      const double eps = eps0 / (1 << k);
      double s = 0;
      for (int ti : panels) {
        const TriData& d = sp.tris[ti];
        for (int i = 0; i < nsub; ++i)
          for (int j = 0; i + j < nsub; ++j)
            for (int half = 0; half < (i + j < nsub - 1 ? 2 : 1); ++half) {
              double b0[3], b1[3], b2[3];
              auto bary = [&](int ii, int jj, double* b) {
                b[1] = double(ii) / nsub;
                b[2] = double(jj) / nsub;
                b[0] = 1.0 - b[1] - b[2];
              };
              if (half == 0) {
                bary(i, j, b0);
                bary(i + 1, j, b1);
                bary(i, j + 1, b2);
              } else {
                bary(i + 1, j, b0);
                bary(i + 1, j + 1, b1);
                bary(i, j + 1, b2);
              }
              for (const auto& q : tri_rule(5)) {
                double bb[3];
                for (int c = 0; c < 3; ++c)
                  bb[c] = q.b[0] * b0[c] + q.b[1] * b1[c] + q.b[2] * b2[c];
                Vec3 x = bb[0] * d.p[0] + bb[1] * d.p[1] + bb[2] * d.p[2];
                s += d.area / (nsub * nsub) * q.w * test(d, bb, x).dot(pot(d, x + eps * d.n));
              }
            }
      }
      vals[k] = s;
    }
    by_subdiv[si] = oracles::richardson3(vals[0], vals[1], vals[2]);
  }
  return (4.0 * by_subdiv[1] - by_subdiv[0]) / 3.0;
}

std::vector<int> star_panels(const OracleSphere& sp, int vertex) {
  std::vector<int> out;
  for (int t = 0; t < sp.surf.n_tris(); ++t)
    for (int c = 0; c < 3; ++c)
      if (sp.tris[t].vert[c] == vertex) {
        out.push_back(t);
        break;
      }
  return out;
}

VecX hemispheric_trace_data(const OracleSphere& sp) {
  SpMat C = curl_incidence(sp.surf, sp.mesh.nodes);
  const Vec3 pn = Vec3(0.31, 0.17, 1.0).normalized();
  auto side = [&](int t) { return pn.dot(sp.tris[t].center) > 0.12; };
  VecX c(sp.surf.n_tris());
  double apos = 0, aneg = 0;
  for (int t = 0; t < sp.surf.n_tris(); ++t) (side(t) ? apos : aneg) += sp.tris[t].area;
  for (int t = 0; t < sp.surf.n_tris(); ++t) c[t] = side(t) ? 1.0 : -apos / aneg;
  MatX Cd(C);
  return Cd.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(c);
}

int run_cli(const std::string& args) {
#ifdef FEMBEM_CLI_PATH
  std::string cmd = std::string(FEMBEM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
#else
  (void)args;
  return -1;
#endif
}

}  // namespace

int main() {
  fs::path work = fs::temp_directory_path() / "fembem_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);
  auto wfile = [&](const std::string& n) { return (work / n).string(); };

  // ---- criteria 1-3 + sphere part of 9: nested magnetized spheres ----
  std::vector<SphereLevel> levels;
  for (int n : {4, 8, 16}) levels.push_back(solve_sphere_level(n));
  {
    bool conv = true;
    for (auto& lv : levels) conv = conv && lv.sol.report.converged;
    const double e1 = std::abs(levels[0].norm_over_mu0 - 1.3644) / 1.3644;
    const double e3 = std::abs(levels[2].norm_over_mu0 - 1.3644) / 1.3644;
    bool monotone = levels[1].l2_error < levels[0].l2_error &&
                    levels[2].l2_error < levels[1].l2_error;
    bool runtime = true;
    for (auto& lv : levels) runtime = runtime && lv.seconds <= 300.0;
    report(1, "magnetized sphere converges to 1.3644",
           conv && e1 <= 0.05 && e3 <= 0.01 && monotone && runtime,
           fmt("norms/mu0 = %.4f, %.4f, %.4f; coarsest %.2f%%, finest %.2f%%; "
               "errors %.3e > %.3e > %.3e; %.0fs/%.0fs/%.0fs",
               levels[0].norm_over_mu0, levels[1].norm_over_mu0, levels[2].norm_over_mu0,
               100 * e1, 100 * e3, levels[0].l2_error, levels[1].l2_error, levels[2].l2_error,
               levels[0].seconds, levels[1].seconds, levels[2].seconds));
  }
  {
    auto B = interior_B(levels[2].sol.a, *levels[2].mesh);
    Vec3 avg = volume_average_B(B, *levels[2].mesh);
    Vec3 expect(0, 0, 2.0 * kMu0 / 3.0);
    double rel = (avg - expect).norm() / expect.norm();
    report(2, "interior field equals (2/3) mu0 e3 on the finest mesh", rel <= 0.02,
           fmt("avg = (%.3e, %.3e, %.3e), deviation %.2f%%", avg[0], avg[1], avg[2], 100 * rel));
  }
  {
    const auto& lv = levels[2];
    VecX t = lv.sys.R * lv.sol.a;
    VecX lam = lv.sys.G * lv.sol.phi;
    auto B = evaluate_exterior_B(*lv.sys.surf, lv.mesh->nodes, t, lam, {Vec3(0, 0, 2)});
    Vec3 dipole(0, 0, kMu0 / 12.0);
    double rel = (B[0] - dipole).norm() / dipole.norm();
    report(3, "exterior dipole at (0,0,2)", rel <= 0.05,
           fmt("B = (%.3e, %.3e, %.3e) vs mu0/12 = %.3e, deviation %.2f%%", B[0][0], B[0][1],
               B[0][2], dipole[2], 100 * rel));
  }

  // ---- criterion 4: symmetry on every fixture, including the extended system
  {
    double worst = 0;
    {
      auto m = std::make_shared<TetMesh>(make_single_tet());
      worst = std::max(worst, symmetry_defect(assemble_system(m), false));
    }
    {
      auto m = std::make_shared<TetMesh>(make_ball(2));
      worst = std::max(worst, symmetry_defect(assemble_system(m), false));
    }
    {
      auto m = std::make_shared<TetMesh>(make_two_balls(2, Vec3(0, 0, 3)));
      worst = std::max(worst, symmetry_defect(assemble_system(m), false));
    }
    {
      TorusFixture fx = make_torus(2, 12);
      auto m = std::make_shared<TetMesh>(fx.mesh);
      CoupledSystem sys = assemble_system(m);
      CurrentSheet s1 = build_current_sheet(*sys.surf, m->nodes, fx.toroidal_cycle);
      CurrentSheet s2 = build_current_sheet(*sys.surf, m->nodes, fx.poloidal_cycle);
      sys = augment_system(sys, {s1, s2});
      worst = std::max(worst, symmetry_defect(sys, true));
    }
    report(4, "coupled and extended systems are symmetric", worst <= 1e-12,
           fmt("worst |S - S^T|/|S| = %.2e", worst));
  }

  // ---- criterion 5: D G = 0 in integer arithmetic on every surface fixture
  {
    bool ok = true;
    ok = ok && integer_dg_zero(extract_boundary(make_single_tet()));
    ok = ok && integer_dg_zero(extract_boundary(make_kuhn_cube()));
    {
      TetMesh b2 = make_ball(2);
      ok = ok && integer_dg_zero(extract_boundary(b2));
    }
    {
      TorusFixture fx = make_torus(2, 10);
      ok = ok && integer_dg_zero(extract_boundary(fx.mesh));
    }
    {
      TetMesh tb = make_two_balls(2, Vec3(0, 0, 3));
      ok = ok && integer_dg_zero(extract_boundary(tb));
    }
    report(5, "weak gauge elimination D G = 0 exactly", ok, "integer incidence on 5 fixtures");
  }

  // ---- criterion 6: cohomology/Ampere on the torus ----
  {
    TorusFixture fx = make_torus(3, 24);
    TorusSolve with = solve_torus_current(fx, 1.0, true);
    TorusSolve without = solve_torus_current(fx, 1.0, false);
    double Iwith = with.sol.report.converged ? torus_linking_integral(with, fx) : 1e9;
    double Iwithout =
        without.sol.report.converged ? torus_linking_integral(without, fx) : 1e9;
    bool ok = with.sol.report.converged && without.sol.report.converged &&
              std::abs(Iwith - 1.0) <= 0.05 && std::abs(Iwithout) <= 0.05;
    report(6, "unit current: linking integral 1 with sheets, 0 without", ok,
           fmt("with = %.4f, without = %.4f", Iwith, Iwithout));
  }

  // ---- criterion 7: block-circulant periodicity ----
  {
    std::mt19937 rng(11);
    std::normal_distribution<double> g;
    double worst_mat = 0, worst_red = 0;
    for (int n : {2, 3, 6}) {
      std::vector<MatX> row(n, MatX(5, 5));
      for (auto& b : row)
        for (int i = 0; i < 25; ++i) b(i / 5, i % 5) = g(rng);
      VecX x(5 * n);
      for (int i = 0; i < x.size(); ++i) x[i] = g(rng);
      VecX y = circulant_matvec(row, x);
      MatX full = materialize_circulant(row);
      worst_mat = std::max(worst_mat, (y - full * x).lpNorm<Eigen::Infinity>() /
                                          (full * x).lpNorm<Eigen::Infinity>());
      VecX xp(5 * n);
      for (int s = 0; s < n; ++s) xp.segment(5 * s, 5) = x.head(5);
      VecX yp = circulant_matvec(row, xp);
      VecX yr = periodic_reduce(row, x.head(5));
      for (int s = 0; s < n; ++s)
        worst_red = std::max(worst_red, (yp.segment(5 * s, 5) - yr).lpNorm<Eigen::Infinity>() /
                                            yr.lpNorm<Eigen::Infinity>());
    }
    // rotated-sector fixture: directly assembled V_{2,3} equals V_{1,2}
    TetMesh master = make_ball(2, 0.5);
    for (auto& p : master.nodes) p += Vec3(2.0, 0, 0);
    SurfaceMesh surf = extract_boundary(master);
    const Vec3 axis(0, 0, 1);
    SectorBlocks sb = assemble_sector_single_layer(surf, master.nodes, axis, 6);
    MatX v23 = assemble_sector_block(surf, master.nodes, axis, 6, 2, 3);
    double sector_err =
        (v23 - sb.first_row[1]).cwiseAbs().maxCoeff() / sb.first_row[1].cwiseAbs().maxCoeff();
    bool ok = worst_mat <= 1e-13 && worst_red <= 1e-13 && sector_err <= 1e-10;
    report(7, "block-circulant products and rotated-sector structure", ok,
           fmt("matvec %.1e, reduction %.1e, V23 vs V12 %.1e", worst_mat, worst_red,
               sector_err));
  }

  // ---- criterion 8: rigid motion block update ----
  {
    auto mesh = std::make_shared<TetMesh>(make_two_balls(4, Vec3(0, 0, 3)));
    mesh->regions[1].magnetization = Vec3(0, 0, 1);
    mesh->regions[2].mu_r = 5.0;
    CoupledSystem sys = assemble_system(mesh);
    EdgeSpace es = make_edge_space(*mesh);
    VecX f = assemble_source(es, *mesh);
    SolverConfig cfg;
    cfg.tolerance = 1e-8;
    cfg.max_iterations = 8000;
    auto P = build_preconditioner(sys, cfg);
    auto sol0 = solve_system(sys, P, f, cfg);

    RigidMotion mv;
    mv.component = 1;
    mv.translation = Vec3(0, 0, 0.1);
    CoupledSystem moved = apply_motion(sys, mv);
    auto fresh_mesh = std::make_shared<TetMesh>(*mesh);
    for (int v = 0; v < fresh_mesh->n_nodes(); ++v)
      if (fresh_mesh->node_component[v] == 1) fresh_mesh->nodes[v] += Vec3(0, 0, 0.1);
    CoupledSystem fresh = assemble_system(fresh_mesh);
    MatX Sm = moved.to_dense(), Sf = fresh.to_dense();
    double block_err = (Sm - Sf).cwiseAbs().maxCoeff() / Sf.cwiseAbs().maxCoeff();

    // pointer-free preconditioner check: rebuilt from the moved system, the
    // application to a fixed vector is bit-identical
    auto Pmoved = build_preconditioner(moved, cfg);
    VecX probe(moved.dim());
    for (int i = 0; i < probe.size(); ++i) probe[i] = std::sin(0.37 * i) + 1.2;
    VecX z0, z1;
    P->as_operator(false).apply(probe, z0);
    Pmoved->as_operator(false).apply(probe, z1);
    bool precond_same = (z0.array() == z1.array()).all();

    SolverConfig warm = cfg;
    warm.initial_guess.resize(moved.dim());
    warm.initial_guess.head(moved.n_fem) = sol0.a;
    warm.initial_guess.tail(moved.n_phi) = sol0.phi;
    auto sol_warm = solve_system(moved, P, f, warm);
    auto sol_cold = solve_system(moved, P, f, cfg);
    bool ok = sol0.report.converged && sol_warm.report.converged &&
              sol_cold.report.converged && block_err <= 1e-12 && precond_same &&
              sol_warm.report.iterations < sol_cold.report.iterations;
    report(8, "rigid motion: block update, fixed preconditioner, warm start", ok,
           fmt("block vs fresh %.2e, precond bit-identical %d, warm %d < cold %d iterations",
               block_err, (int)precond_same, sol_warm.report.iterations,
               sol_cold.report.iterations));
  }

  // ---- criterion 9: preconditioner trends ----
  {
    double lvl_growth = 0;
    for (int k = 1; k < 3; ++k)
      lvl_growth = std::max(lvl_growth, double(levels[k].sol.report.iterations) /
                                            levels[k - 1].sol.report.iterations);
    struct Lv {
      int m, nphi;
    };
    Lv tlv[3] = {{2, 12}, {3, 18}, {4, 24}};
    int iters[3][3];
    bool conv = true;
    for (int li = 0; li < 3; ++li) {
      TorusFixture fx = make_torus(tlv[li].m, tlv[li].nphi);
      int mi = 0;
      for (double mu : {1.0, 1e2, 1e5}) {
        TorusSolve ts = solve_torus_current(fx, mu, true);
        conv = conv && ts.sol.report.converged;
        iters[li][mi++] = ts.sol.report.iterations;
      }
    }
    double mu_growth = 0, tor_lvl_growth = 0;
    for (int li = 0; li < 3; ++li) {
      int lo = *std::min_element(iters[li], iters[li] + 3);
      int hi = *std::max_element(iters[li], iters[li] + 3);
      mu_growth = std::max(mu_growth, double(hi) / lo);
    }
    for (int mi = 0; mi < 3; ++mi)
      for (int li = 1; li < 3; ++li)
        tor_lvl_growth =
            std::max(tor_lvl_growth, double(iters[li][mi]) / iters[li - 1][mi]);
    bool ok = conv && lvl_growth <= 2.0 && tor_lvl_growth <= 2.0 && mu_growth <= 3.0;
    report(9, "iteration growth <= 2x per level and <= 3x across mu_r", ok,
           fmt("sphere %d/%d/%d (max %.2fx); torus levels max %.2fx; mu sweep max %.2fx",
               levels[0].sol.report.iterations, levels[1].sol.report.iterations,
               levels[2].sol.report.iterations, lvl_growth, tor_lvl_growth, mu_growth));
  }

  // ---- criterion 10: operator trace oracles and G^T V G definiteness ----
  {
    OracleSphere sp;
    MatX V = assemble_single_layer(sp.surf, sp.mesh.nodes);
    MatX K = assemble_double_layer(sp.surf, sp.mesh.nodes);
    MatX N = assemble_hypersingular(sp.surf, sp.mesh.nodes);
    MatX Gd(sp.G);

    VecX psi(sp.surf.n_vertices());
    for (int k = 0; k < sp.surf.n_vertices(); ++k)
      psi[k] = sp.mesh.nodes[sp.surf.vertices[k]][2];
    VecX lam = sp.G * psi;
    int k0 = 3;
    VecX mu = sp.G * VecX::Unit(sp.surf.n_vertices(), k0);
    double v_gal = mu.dot(V * lam);
    double v_orc = trace_oracle(
        sp, star_panels(sp, k0),
        [&](const TriData& d, const double*, const Vec3& x) -> Vec3 {
          Vec3 v = Vec3::Zero();
          for (int l = 0; l < 3; ++l)
            if (double c = mu[d.edge[l]]; c != 0.0) v += c * rt_value(d, l, x);
          return v;
        },
        [&](const TriData&, const Vec3& xoff) -> Vec3 {
          return oracles::eval_psiA(
              sp.tris,
              [&](const TriData& dd, const Vec3& y) { return oracles::rt_density(dd, lam, y); },
              xoff);
        },
        2e-3, 4);

    VecX w = hemispheric_trace_data(sp);
    int kc = 0;
    {
      double best = -1e30;
      for (int k = 0; k < sp.surf.n_vertices(); ++k) {
        Vec3 p = sp.mesh.nodes[sp.surf.vertices[k]];
        double score = p[0] + 0.6 * p[1] + 1.3 * p[2];
        if (p[2] > 0.3 && score > best) {
          best = score;
          kc = k;
        }
      }
    }
    VecX muc = sp.G * VecX::Unit(sp.surf.n_vertices(), kc);
    double k_gal = muc.dot(K * w);
    double k_orc = trace_oracle(
        sp, star_panels(sp, kc),
        [&](const TriData& d, const double*, const Vec3& x) -> Vec3 {
          Vec3 v = Vec3::Zero();
          for (int l = 0; l < 3; ++l)
            if (double c = muc[d.edge[l]]; c != 0.0) v += c * rt_value(d, l, x);
          return v;
        },
        [&](const TriData&, const Vec3& xoff) -> Vec3 {
          return oracles::eval_psiM(
              sp.tris,
              [&](const TriData& dd, const Vec3& y) { return oracles::trace_density(dd, w, y); },
              xoff);
        },
        1e-3, 6);

    int kp = 0;
    for (int k = 1; k < sp.surf.n_vertices(); ++k)
      if (sp.mesh.nodes[sp.surf.vertices[k]][2] > sp.mesh.nodes[sp.surf.vertices[kp]][2]) kp = k;
    int e0 = -1;
    for (int e = 0; e < sp.surf.n_edges() && e0 < 0; ++e)
      if (sp.surf.node_vertex[sp.surf.edges[e][0]] == kp ||
          sp.surf.node_vertex[sp.surf.edges[e][1]] == kp)
        e0 = e;
    double n_gal = (N * w)[e0];
    double n_orc = trace_oracle(
        sp, {sp.surf.edge_tri[e0][0], sp.surf.edge_tri[e0][1]},
        [&](const TriData& d, const double* b, const Vec3&) -> Vec3 {
          for (int l = 0; l < 3; ++l)
            if (d.edge[l] == e0) return tracew_value(d, l, b);
          return Vec3::Zero();
        },
        [&](const TriData& d, const Vec3& xoff) -> Vec3 {
          Vec3 curl = oracles::eval_curl_psiM(
              sp.tris,
              [&](const TriData& dd, const Vec3& y) { return oracles::trace_density(dd, w, y); },
              xoff);
          return curl.cross(d.n);
        },
        1e-3, 6);

    MatX Gg = Gd.rightCols(sp.surf.n_vertices() - 1);  // complement of the constant
    Eigen::SelfAdjointEigenSolver<MatX> es(Gg.transpose() * V * Gg);
    double mineig = es.eigenvalues()[0];

    double ve = std::abs(v_gal - v_orc) / std::abs(v_orc);
    double ke = std::abs(k_gal - k_orc) / std::abs(k_orc);
    double ne = std::abs(n_gal - n_orc) / std::abs(n_orc);
    bool ok = ve <= 1e-3 && ke <= 1e-3 && ne <= 1e-3 && mineig > 0;
    report(10, "V, K, N trace oracles within 1e-3; GtVG positive definite", ok,
           fmt("V %.1e, K %.1e, N %.1e; min eig (grounded) = %.3e", ve, ke, ne, mineig));
  }

  // ---- external interfaces: CLI binary, exit codes, artifacts ----
  {
    write_msh(make_ball(4), wfile("ball4.msh"));
    write_msh(make_ball(2), wfile("ball2.msh"));
    CaseConfig cfg;
    cfg.mesh = wfile("ball4.msh");
    RegionSpec r;
    r.magnetization = Vec3(0, 0, 1);
    cfg.regions[1] = r;
    cfg.analytic = "magnetized_sphere";
    cfg.output_directory = wfile("cli_out");
    save_config(cfg, wfile("sphere.json"));
    int rc = run_cli("run " + wfile("sphere.json") + " --threads 1");
    bool artifacts = fs::exists(wfile("cli_out/case.csv")) &&
                     fs::exists(wfile("cli_out/report.json")) &&
                     fs::exists(wfile("cli_out/step0.vtk")) &&
                     fs::exists(wfile("cli_out/step0_phi.vtk"));
    bool csv_norm = false;
    {
      std::ifstream in(wfile("cli_out/case.csv"));
      std::string header, row;
      std::getline(in, header);
      std::getline(in, row);
      std::stringstream ss(row);
      std::string tok;
      for (int i = 0; i <= 5 && std::getline(ss, tok, ','); ++i) {
      }
      if (!tok.empty()) {
        double v = std::atof(tok.c_str());
        csv_norm = std::abs(v / kMu0 - 1.3644) <= 0.05 * 1.3644;
      }
    }
    report_extra("cli run writes artifacts with the sphere norm",
                 rc == 0 && artifacts && csv_norm,
                 fmt("exit %d, artifacts %d, csv l2_norm ok %d", rc, (int)artifacts,
                     (int)csv_norm));

    CaseConfig bad = cfg;
    bad.regions.clear();
    bad.regions[9] = r;
    save_config(bad, wfile("bad_region.json"));
    int rc2 = run_cli("run " + wfile("bad_region.json"));
    CaseConfig noio = cfg;
    noio.mesh = wfile("missing.msh");
    save_config(noio, wfile("no_mesh.json"));
    int rc4 = run_cli("run " + wfile("no_mesh.json"));
    CaseConfig starve = cfg;
    starve.solver.max_iterations = 2;
    starve.output_directory = wfile("cli_starve");
    save_config(starve, wfile("starve.json"));
    int rc3 = run_cli("run " + wfile("starve.json"));
    report_extra("cli exit codes: 2 config, 3 solver, 4 io",
                 rc2 == 2 && rc3 == 3 && rc4 == 4, fmt("got %d, %d, %d", rc2, rc3, rc4));

    CaseConfig study = cfg;
    study.study.meshes = {wfile("ball2.msh"), wfile("ball4.msh")};
    study.output_directory = wfile("cli_study");
    study.write_vtk = false;
    save_config(study, wfile("study.json"));
    int rc5 = run_cli("study " + wfile("study.json"));
    bool table = fs::exists(wfile("cli_study/convergence.csv"));
    report_extra("cli study writes the convergence table", rc5 == 0 && table,
                 fmt("exit %d, table %d", rc5, (int)table));
  }

  // motion script through the batch front-end: later steps profit from the
  // warm start
  {
    write_msh(make_two_balls(2, Vec3(0, 0, 3)), wfile("two.msh"));
    CaseConfig cfg;
    cfg.mesh = wfile("two.msh");
    RegionSpec r1;
    r1.magnetization = Vec3(0, 0, 1);
    cfg.regions[1] = r1;
    RegionSpec r2;
    r2.mu_r = 3.0;
    cfg.regions[2] = r2;
    cfg.output_directory = wfile("motion_out");
    for (int s = 0; s < 3; ++s)
      cfg.motion.push_back({1, Vec3(0, 0, 1), 0.0, Vec3(0, 0, 0.05)});
    std::ostringstream log;
    CaseResult res = run_case(cfg, log);
    bool vtks = fs::exists(wfile("motion_out/step1.vtk")) &&
                fs::exists(wfile("motion_out/step2.vtk")) &&
                fs::exists(wfile("motion_out/step3.vtk"));
    bool ok = res.exit_code == 0 && res.steps.size() == 4 && vtks &&
              res.steps[1].report.iterations < res.steps[0].report.iterations &&
              res.steps[2].report.iterations < res.steps[0].report.iterations &&
              res.steps[3].report.iterations < res.steps[0].report.iterations;
    std::string its;
    for (auto& st : res.steps) its += std::to_string(st.report.iterations) + " ";
    report_extra("motion script: per-step artifacts and warm-start savings", ok,
                 fmt("exit %d, iterations: %s", res.exit_code, its.c_str()));
  }

  std::printf("%s: %d criterion/interface failure(s)\n", g_failures == 0 ? "OK" : "FAILED",
              g_failures);
  return g_failures == 0 ? 0 : 1;
}
