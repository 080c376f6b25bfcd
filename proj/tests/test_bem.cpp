#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fembem/bem.hpp"
#include "fembem/fem.hpp"
#include "fembem/fixtures.hpp"
#include "support/oracles.hpp"

using namespace fembem;

namespace {

TriData make_isolated_tri(const Vec3& p0, const Vec3& p1, const Vec3& p2, int offset) {
  TriData d;
  d.p[0] = p0;
  d.p[1] = p1;
  d.p[2] = p2;
  Vec3 cr = (p1 - p0).cross(p2 - p0);
  d.area = 0.5 * cr.norm();
  d.n = cr.normalized();
  for (int i = 0; i < 3; ++i) {
    d.gl[i] = d.n.cross(d.p[(i + 2) % 3] - d.p[(i + 1) % 3]) / (2.0 * d.area);
    d.curl_hat[i] = d.gl[i].cross(d.n);
    d.edge[i] = offset + i;
    d.esign[i] = 1.0;
    d.node[i] = offset + i;  // distinct ids => pairs classify as separated
    d.vert[i] = offset + i;
  }
  for (int l = 0; l < 3; ++l)
    d.curl_w[l] = 2.0 * d.esign[l] * d.gl[l].cross(d.gl[(l + 1) % 3]).dot(d.n);
  d.center = (p0 + p1 + p2) / 3.0;
  d.diam = std::max({(p1 - p0).norm(), (p2 - p1).norm(), (p0 - p2).norm()});
  return d;
}

double pi_functional_const(const SurfaceMesh& s, const std::vector<Vec3>& X, int t,
                           const Vec3& v, int e) {
  Vec3 a = X[s.edges[e][0]], b = X[s.edges[e][1]];
  Vec3 cr = (X[s.tris[t][1]] - X[s.tris[t][0]]).cross(X[s.tris[t][2]] - X[s.tris[t][0]]);
  return cr.normalized().cross(v).dot(b - a);
}

struct SphereSetup {
  TetMesh mesh;
  SurfaceMesh surf;
  std::vector<TriData> tris;
  SpMat G;
  explicit SphereSetup(int n) : mesh(make_ball(n)), surf(extract_boundary(mesh)) {
    tris = build_tri_data(surf, mesh.nodes);
    G = topological_gradient(surf);
  }
};

VecX constant_trace(const SurfaceMesh& s, const std::vector<Vec3>& X, const Vec3& c) {
  VecX w(s.n_edges());
  for (int e = 0; e < s.n_edges(); ++e) w[e] = c.dot(X[s.edges[e][1]] - X[s.edges[e][0]]);
  return w;
}

// ∫ test(x)·F(x + eps n) ds over a panel subset, extrapolated to eps -> 0+.
// The outer integrand has weak kinks at panel edges, so the outer rule is a
// lattice subdivision with Richardson over two resolutions; eps uses a
// three-point Richardson.
template <class TestF, class PotF>
double panel_trace_integral(const std::vector<TriData>& tris, const std::vector<int>& panels,
                            TestF&& test, PotF&& pot, double eps, int subdiv) {
  double s = 0;
  for (int ti : panels) {
    const TriData& d = tris[ti];
    const int n = subdiv;
    for (int i = 0; i < n; ++i)
      for (int j = 0; i + j < n; ++j)
        for (int half = 0; half < (i + j < n - 1 ? 2 : 1); ++half) {
          double b0[3], b1[3], b2[3];
          auto bary = [&](int ii, int jj, double* b) {
            b[1] = double(ii) / n;
            b[2] = double(jj) / n;
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
            for (int c = 0; c < 3; ++c) bb[c] = q.b[0] * b0[c] + q.b[1] * b1[c] + q.b[2] * b2[c];
            Vec3 x = bb[0] * d.p[0] + bb[1] * d.p[1] + bb[2] * d.p[2];
            s += d.area / (n * n) * q.w * test(d, bb, x).dot(pot(d, x + eps * d.n));
          }
        }
  }
  return s;
}

template <class TestF, class PotF>
double extrapolated_trace(const SphereSetup& sp, const std::vector<int>& panels, TestF&& test,
                          PotF&& pot, double eps0 = 2e-3, int subdiv0 = 4) {
  double by_subdiv[2];
  for (int si = 0; si < 2; ++si) {
    const int subdiv = subdiv0 * (si + 1);
    double vals[3];
    for (int k = 0; k < 3; ++k)
      vals[k] = panel_trace_integral(sp.tris, panels, test, pot, eps0 / (1 << k), subdiv);
    by_subdiv[si] = oracles::richardson3(vals[0], vals[1], vals[2]);
  }
  return (4.0 * by_subdiv[1] - by_subdiv[0]) / 3.0;
}

// panels forming the support of a vertex hat function
std::vector<int> star_panels(const SphereSetup& sp, int vertex) {
  std::vector<int> out;
  for (int t = 0; t < sp.surf.n_tris(); ++t)
    for (int c = 0; c < 3; ++c)
      if (sp.tris[t].vert[c] == vertex) {
        out.push_back(t);
        break;
      }
  return out;
}

}  // namespace

TEST_CASE("RT dof functional reproduces coefficients") {
  SphereSetup sp(2);
  const auto g3 = gauss_legendre(3);
  for (int e : {0, 5, 17, 40}) {
    for (int side = 0; side < 2; ++side) {
      int t = sp.surf.edge_tri[e][side];
      const TriData& d = sp.tris[t];
      for (int l = 0; l < 3; ++l) {
        Vec3 a = sp.mesh.nodes[sp.surf.edges[e][0]], b = sp.mesh.nodes[sp.surf.edges[e][1]];
        double val = 0;
        for (const auto& q : g3) {
          Vec3 y = a + q.x * (b - a);
          val += q.w * d.n.cross(rt_value(d, l, y)).dot(b - a);
        }
        double expect = (d.edge[l] == e) ? 1.0 : 0.0;
        REQUIRE(val == Catch::Approx(expect).margin(1e-10));
      }
    }
  }
}

TEST_CASE("topological gradient is the signed incidence fixed by the dof functional") {
  SphereSetup sp(2);
  MatX G(sp.G);
  for (int e : {1, 9, 33}) {
    int a = sp.surf.edges[e][0], b = sp.surf.edges[e][1];
    for (int side = 0; side < 2; ++side) {
      int t = sp.surf.edge_tri[e][side];
      const TriData& d = sp.tris[t];
      for (int k = 0; k < 3; ++k) {
        double val = pi_functional_const(sp.surf, sp.mesh.nodes, t, d.curl_hat[k], e);
        double expect = 0.0;
        if (d.node[k] == b) expect = 1.0;
        if (d.node[k] == a) expect = -1.0;
        REQUIRE(val == Catch::Approx(expect).margin(1e-10));
        REQUIRE(G(e, d.vert[k]) == expect);
      }
    }
  }
  for (int k = 0; k < sp.surf.n_vertices(); ++k) {
    int deg = 0;
    for (int e = 0; e < sp.surf.n_edges(); ++e)
      if (sp.surf.edges[e][0] == sp.surf.vertices[k] ||
          sp.surf.edges[e][1] == sp.surf.vertices[k])
        ++deg;
    REQUIRE(G.col(k).cwiseAbs().sum() == double(deg));
  }
}

TEST_CASE("weak gauge elimination: D G = 0 exactly in integer arithmetic") {
  for (int fixture = 0; fixture < 2; ++fixture) {
    TetMesh mesh = fixture == 0 ? make_ball(2) : make_torus(2, 10).mesh;
    SurfaceMesh s = extract_boundary(mesh);
    SpMat G = topological_gradient(s);
    for (int t = 0; t < s.n_tris(); ++t)
      for (int k = 0; k < s.n_vertices(); ++k) {
        long sum = 0;
        for (int l = 0; l < 3; ++l) {
          long g = std::lround(G.coeff(s.tri_edge[t][l], k));
          sum += static_cast<long>(s.tri_edge_sign[t][l]) * g;
        }
        REQUIRE(sum == 0);
      }
  }
}

TEST_CASE("surface curls of hats expand exactly in the RT basis via G") {
  SphereSetup sp(2);
  for (int t : {0, 7, 23}) {
    const TriData& d = sp.tris[t];
    double bary[3] = {0.5, 0.3, 0.2};
    Vec3 x = bary[0] * d.p[0] + bary[1] * d.p[1] + bary[2] * d.p[2];
    for (int k = 0; k < 3; ++k) {
      Vec3 sum = Vec3::Zero();
      for (int l = 0; l < 3; ++l) sum += sp.G.coeff(d.edge[l], d.vert[k]) * rt_value(d, l, x);
      REQUIRE((sum - d.curl_hat[k]).norm() <= 1e-12 * d.curl_hat[k].norm());
    }
  }
}

TEST_CASE("far-field single layer entry matches the moment-product limit") {
  // congruent parallel unit triangles: isotropic second moments make the
  // centroid rule accurate to the quadrupole term
  const double h = std::sqrt(3.0) / 2.0;
  for (double dist : {100.0, 400.0}) {
    TriData A = make_isolated_tri(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, h, 0), 0);
    TriData B =
        make_isolated_tri(Vec3(0, 0, dist), Vec3(1, 0, dist), Vec3(0.5, h, dist), 10);
    PairWorkspace ws;
    double acc[3][3];
    pair_single_layer(A, B, false, BemOptions{}, ws, acc);
    // the quadrupole residue scales like dist^-2: ~7e-6 at 100, <1e-6 at 400
    const double tol = dist < 200 ? 2e-5 : 1e-6;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        // centroid kernel value times the exact RT moments ∫ phi = (c - p_opp)/2
        Vec3 ma = A.esign[a] * (A.center - A.p[(a + 2) % 3]) * 0.5;
        Vec3 mb = B.esign[b] * (B.center - B.p[(b + 2) % 3]) * 0.5;
        double one_point = kernel_U(A.center - B.center) * ma.dot(mb);
        REQUIRE(acc[a][b] == Catch::Approx(one_point).epsilon(tol));
      }
  }
}

TEST_CASE("single layer is symmetric on the coarsest sphere") {
  SphereSetup sp(2);
  MatX V = assemble_single_layer(sp.surf, sp.mesh.nodes);
  REQUIRE((V - V.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * V.cwiseAbs().maxCoeff());
}

TEST_CASE("GtVG is positive definite on the complement of constants") {
  SphereSetup sp(2);
  MatX V = assemble_single_layer(sp.surf, sp.mesh.nodes);
  MatX Gd(sp.G);
  MatX GVG = Gd.transpose() * V * Gd;
  Eigen::SelfAdjointEigenSolver<MatX> es(GVG);
  const auto& ev = es.eigenvalues();
  REQUIRE(std::abs(ev[0]) <= 1e-12 * ev[ev.size() - 1]);
  REQUIRE(ev[1] > 0);
  MatX Gg = Gd.rightCols(sp.surf.n_vertices() - 1);
  Eigen::SelfAdjointEigenSolver<MatX> esg(Gg.transpose() * V * Gg);
  REQUIRE(esg.eigenvalues()[0] > 0);
}

TEST_CASE("double layer vanishes for coplanar panels") {
  TriData A = make_isolated_tri(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), 0);
  TriData B = make_isolated_tri(Vec3(3, 0.2, 0), Vec3(4, 0.1, 0), Vec3(3.2, 1.2, 0), 10);
  PairWorkspace ws;
  double acc[3][3];
  pair_double_layer_pv(A, B, BemOptions{}, ws, acc);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) REQUIRE(std::abs(acc[a][b]) <= 1e-10);
}

TEST_CASE("single layer matches the off-surface trace oracle") {
  SphereSetup sp(2);
  MatX V = assemble_single_layer(sp.surf, sp.mesh.nodes);
  VecX psi(sp.surf.n_vertices());
  for (int k = 0; k < sp.surf.n_vertices(); ++k) psi[k] = sp.mesh.nodes[sp.surf.vertices[k]][2];
  VecX lam = sp.G * psi;  // divergence-free RT data, smooth potential
  const int k0 = 3;
  VecX mu = sp.G * VecX::Unit(sp.surf.n_vertices(), k0);
  double galerkin = mu.dot(V * lam);
  double oracle = extrapolated_trace(
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
      });
  CAPTURE(galerkin, oracle);
  REQUIRE(galerkin == Catch::Approx(oracle).epsilon(1e-3));
}

// Discrete trace data whose per-triangle surface curl is +1 on the upper
// hemisphere and -1 on the lower one: the only curl jump line is the equator,
// so probes supported near the poles see a smooth integrand. Solved from the
// (consistent) least-squares system C w = c.
static VecX hemispheric_trace_data(const SphereSetup& sp) {
  SpMat C = curl_incidence(sp.surf, sp.mesh.nodes);
  // tilted split plane: keeps the curl jump line away from the probes and
  // breaks the mesh symmetries that would contract the probes to zero
  const Vec3 pn = Vec3(0.31, 0.17, 1.0).normalized();
  auto side = [&](int t) { return pn.dot(sp.tris[t].center) > 0.12; };
  VecX c(sp.surf.n_tris());
  double apos = 0, aneg = 0;
  for (int t = 0; t < sp.surf.n_tris(); ++t) (side(t) ? apos : aneg) += sp.tris[t].area;
  for (int t = 0; t < sp.surf.n_tris(); ++t) c[t] = side(t) ? 1.0 : -apos / aneg;
  MatX Cd(C);
  VecX w = Cd.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(c);
  REQUIRE((Cd * w - c).lpNorm<Eigen::Infinity>() < 1e-10);
  return w;
}

// a vertex near the north pole and an edge of its star
static int polar_vertex(const SphereSetup& sp) {
  int best = 0;
  for (int k = 1; k < sp.surf.n_vertices(); ++k)
    if (sp.mesh.nodes[sp.surf.vertices[k]][2] > sp.mesh.nodes[sp.surf.vertices[best]][2])
      best = k;
  return best;
}

TEST_CASE("double layer (with its exterior jump) matches the off-surface trace oracle") {
  SphereSetup sp(2);
  MatX K = assemble_double_layer(sp.surf, sp.mesh.nodes);
  VecX w = hemispheric_trace_data(sp);
  // probe at an upper cube-corner vertex: far from the curl jump line and
  // not on a symmetry axis of the data (the polar probe contracts to zero)
  int k0 = 0;
  {
    double best = -1e30;
    for (int k = 0; k < sp.surf.n_vertices(); ++k) {
      Vec3 p = sp.mesh.nodes[sp.surf.vertices[k]];
      double score = p[0] + 0.6 * p[1] + 1.3 * p[2];
      if (p[2] > 0.3 && score > best) {
        best = score;
        k0 = k;
      }
    }
  }
  VecX mu = sp.G * VecX::Unit(sp.surf.n_vertices(), k0);
  double galerkin = mu.dot(K * w);
  double oracle = extrapolated_trace(
      sp, star_panels(sp, k0),
      [&](const TriData& d, const double*, const Vec3& x) -> Vec3 {
        Vec3 v = Vec3::Zero();
        for (int l = 0; l < 3; ++l)
          if (double c = mu[d.edge[l]]; c != 0.0) v += c * rt_value(d, l, x);
        return v;
      },
      [&](const TriData&, const Vec3& xoff) -> Vec3 {
        return oracles::eval_psiM(
            sp.tris,
            [&](const TriData& dd, const Vec3& y) { return oracles::trace_density(dd, w, y); },
            xoff);
      },
      1e-3, 6);
  CAPTURE(galerkin, oracle);
  REQUIRE(galerkin == Catch::Approx(oracle).epsilon(1e-3));
}

TEST_CASE("hypersingular operator matches the off-surface trace oracle") {
  SphereSetup sp(2);
  MatX N = assemble_hypersingular(sp.surf, sp.mesh.nodes);
  // constant-field traces have zero discrete surface curl and are annihilated
  VecX wc = constant_trace(sp.surf, sp.mesh.nodes, Vec3(0.2, 1.0, -0.4));
  REQUIRE((N * wc).lpNorm<Eigen::Infinity>() <= 1e-10 * N.cwiseAbs().maxCoeff());

  VecX w = hemispheric_trace_data(sp);
  const int k0 = polar_vertex(sp);
  // trace test function: an edge of the polar star
  int e0 = -1;
  for (int e = 0; e < sp.surf.n_edges(); ++e)
    if (sp.surf.node_vertex[sp.surf.edges[e][0]] == k0 ||
        sp.surf.node_vertex[sp.surf.edges[e][1]] == k0) {
      e0 = e;
      break;
    }
  REQUIRE(e0 >= 0);
  double galerkin = (N * w)[e0];
  double oracle = extrapolated_trace(
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
  CAPTURE(galerkin, oracle);
  REQUIRE(galerkin == Catch::Approx(oracle).epsilon(1e-3).margin(1e-9));
  REQUIRE((N - N.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * N.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<MatX> es(N);
  REQUIRE(es.eigenvalues().maxCoeff() <= 1e-10 * std::abs(es.eigenvalues().minCoeff()));
}

TEST_CASE("fused block assembly agrees with the matrix products") {
  SphereSetup sp(2);
  MatX V = assemble_single_layer(sp.surf, sp.mesh.nodes);
  MatX Kpv = assemble_double_layer_pv(sp.surf, sp.mesh.nodes);
  MatX P = assemble_panel_sl(sp.surf, sp.mesh.nodes);
  FusedBlocks fb = assemble_fused_blocks(sp.surf, sp.mesh.nodes, 0, 0);
  MatX Gd(sp.G);
  REQUIRE((fb.BV - Gd.transpose() * V * Gd).cwiseAbs().maxCoeff() <=
          1e-12 * fb.BV.cwiseAbs().maxCoeff());
  REQUIRE((fb.BKrc - Gd.transpose() * Kpv).cwiseAbs().maxCoeff() <=
          1e-12 * fb.BKrc.cwiseAbs().maxCoeff());
  REQUIRE((fb.P - P).cwiseAbs().maxCoeff() <= 1e-12 * P.cwiseAbs().maxCoeff());
}

TEST_CASE("sheet contraction agrees with the dense operators") {
  SphereSetup sp(2);
  MatX V = assemble_single_layer(sp.surf, sp.mesh.nodes);
  MatX Kpv = assemble_double_layer_pv(sp.surf, sp.mesh.nodes);
  VecX eta = VecX::Zero(sp.surf.n_edges());
  std::mt19937 rng(17);
  std::uniform_int_distribution<int> pick(0, sp.surf.n_edges() - 1);
  for (int i = 0; i < 10; ++i) eta[pick(rng)] = (i % 2) ? 1.0 : -1.0;
  SheetContraction sc = contract_sheet(sp.surf, sp.mesh.nodes, eta);
  REQUIRE((sc.V_eta - V * eta).lpNorm<Eigen::Infinity>() <=
          1e-12 * (V * eta).lpNorm<Eigen::Infinity>());
  REQUIRE((sc.KmiT_eta_pv - Kpv.transpose() * eta).lpNorm<Eigen::Infinity>() <=
          1e-12 * (Kpv.transpose() * eta).lpNorm<Eigen::Infinity>());
}

TEST_CASE("exterior field of zero Cauchy data is zero") {
  SphereSetup sp(2);
  VecX zero = VecX::Zero(sp.surf.n_edges());
  auto B = evaluate_exterior_B(sp.surf, sp.mesh.nodes, zero, zero, {Vec3(0, 0, 2)});
  REQUIRE(B[0].norm() == 0.0);
}

TEST_CASE("near-field evaluation is rejected") {
  SphereSetup sp(2);
  VecX zero = VecX::Zero(sp.surf.n_edges());
  REQUIRE_THROWS_AS(
      evaluate_exterior_B(sp.surf, sp.mesh.nodes, zero, zero, {Vec3(0, 0, 1.001)}),
      NearFieldError);
}

TEST_CASE("representation formula reproduces the sphere dipole from analytic Cauchy data") {
  TetMesh mesh = make_ball(4);
  SurfaceMesh surf = extract_boundary(mesh);
  const double M0 = 1.0;
  auto Aplus = [&](const Vec3& x) -> Vec3 {
    double r = x.norm();
    return kMu0 * M0 / 3.0 * Vec3(0, 0, 1).cross(x) / (r * r * r);
  };
  auto Bplus = [&](const Vec3& x) -> Vec3 {
    double r = x.norm();
    Vec3 rh = x / r;
    Vec3 mvec = (4.0 * kPi / 3.0) * M0 * Vec3(0, 0, 1);
    return kMu0 / (4.0 * kPi) * (3.0 * rh * mvec.dot(rh) - mvec) / (r * r * r);
  };
  VecX w = interpolate_trace(surf, mesh.nodes, Aplus);
  VecX lam = interpolate_rt(surf, mesh.nodes, [&](const Vec3& x) -> Vec3 {
    return Bplus(x).cross(x.normalized());  // gammaN+ A = curl A x n
  });
  auto B = evaluate_exterior_B(surf, mesh.nodes, w, lam,
                               {Vec3(0, 0, 2), Vec3(0, 0, 4), Vec3(0, 0, 8)});
  Vec3 expect = Bplus(Vec3(0, 0, 2));
  CAPTURE(B[0].transpose(), expect.transpose());
  REQUIRE((B[0] - expect).norm() <= 0.05 * expect.norm());
  double ratio = B[1].norm() / B[2].norm();
  REQUIRE(ratio == Catch::Approx(8.0).epsilon(0.10));
}
