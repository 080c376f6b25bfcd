#pragma once

#include "fembem/mesh.hpp"

namespace fembem {

// Structured fixture meshes used by the test-suite, the demos and the
// convergence studies. These are deliberately simple constructions
// (Kuhn-split grids, revolved cross-sections); they are not a mesher.

inline TetMesh make_single_tet() {
  TetMesh m;
  m.nodes = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  m.tets = {{0, 1, 2, 3}};
  m.region_tag = {1};
  m.regions[1] = Region{};
  m.finalize();
  return m;
}

inline TetMesh make_two_tets() {
  TetMesh m;
  m.nodes = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 1, 1)};
  m.tets = {{0, 1, 2, 3}, {1, 2, 3, 4}};
  m.region_tag = {1, 1};
  m.regions[1] = Region{};
  m.finalize();
  return m;
}

namespace detail {

// 6-tet Kuhn decomposition of the cell with corner ids c[i][j][k]; every cell
// uses the same axis-aligned pattern, which keeps neighboring cells conformal.
inline void kuhn_split(const int c[2][2][2], std::vector<std::array<int, 4>>& tets) {
  static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& p : perms) {
    int idx[3] = {0, 0, 0};
    std::array<int, 4> tet;
    tet[0] = c[0][0][0];
    for (int s = 0; s < 3; ++s) {
      idx[p[s]] = 1;
      tet[s + 1] = c[idx[0]][idx[1]][idx[2]];
    }
    tets.push_back(tet);
  }
}

}  // namespace detail

// Axis-aligned box split into nx*ny*nz Kuhn cells.
inline TetMesh make_box(int nx, int ny, int nz, const Vec3& lo = Vec3(0, 0, 0),
                        const Vec3& hi = Vec3(1, 1, 1)) {
  TetMesh m;
  auto id = [&](int i, int j, int k) { return (i * (ny + 1) + j) * (nz + 1) + k; };
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j <= ny; ++j)
      for (int k = 0; k <= nz; ++k)
        m.nodes.push_back(lo + Vec3((hi - lo)[0] * i / nx, (hi - lo)[1] * j / ny,
                                    (hi - lo)[2] * k / nz));
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nz; ++k) {
        int c[2][2][2];
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            for (int d = 0; d < 2; ++d) c[a][b][d] = id(i + a, j + b, k + d);
        detail::kuhn_split(c, m.tets);
      }
  m.region_tag.assign(m.tets.size(), 1);
  m.regions[1] = Region{};
  m.finalize();
  return m;
}

inline TetMesh make_kuhn_cube() { return make_box(1, 1, 1); }

// Ball of radius `radius`, built from a Kuhn grid on [-1,1]^3 mapped onto the
// ball by p -> p * |p|_inf / |p|_2. Boundary nodes land exactly on the sphere;
// the facets are secants, so the geometric error is the usual polyhedral one.
// With `air_layers_from` >= 0, cells whose max-norm shell index is >= that
// value get region tag 2 (air shell for truncated-domain studies); the
// material interface is then the exact image of an inner grid shell.
inline TetMesh make_ball(int n, double radius = 1.0, int air_layers_from = -1) {
  if (n < 2 || n % 2 != 0) throw MeshError("ball fixture needs an even cell count >= 2");
  TetMesh m;
  const int half = n / 2;
  auto id = [&](int i, int j, int k) { return (i * (n + 1) + j) * (n + 1) + k; };
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j)
      for (int k = 0; k <= n; ++k) {
        Vec3 p(double(i - half) / half, double(j - half) / half, double(k - half) / half);
        double linf = p.lpNorm<Eigen::Infinity>();
        double l2 = p.norm();
        m.nodes.push_back(l2 > 0 ? Vec3(radius * linf / l2 * p) : Vec3(0, 0, 0));
      }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        int c[2][2][2];
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            for (int d = 0; d < 2; ++d) c[a][b][d] = id(i + a, j + b, k + d);
        detail::kuhn_split(c, m.tets);
        int shell = std::max({std::abs(2 * i + 1 - n), std::abs(2 * j + 1 - n),
                              std::abs(2 * k + 1 - n)});  // 2*shell_index+1 in half-cells
        int layer = (shell - 1) / 2;                      // 0-based shell of the cell
        int tag = (air_layers_from >= 0 && layer >= air_layers_from) ? 2 : 1;
        for (int r = 0; r < 6; ++r) m.region_tag.push_back(tag);
      }
  m.regions[1] = Region{};
  if (air_layers_from >= 0) m.regions[2] = Region{};
  m.finalize();
  return m;
}

// Two disjoint balls; the second is translated by `offset` and tagged as
// region 2. Used by the rigid-motion fixtures.
inline TetMesh make_two_balls(int n, const Vec3& offset, double radius = 1.0) {
  TetMesh a = make_ball(n, radius);
  TetMesh m = a;
  const int base = a.n_nodes();
  for (const auto& p : a.nodes) m.nodes.push_back(p + offset);
  for (const auto& t : a.tets)
    m.tets.push_back({t[0] + base, t[1] + base, t[2] + base, t[3] + base});
  for (std::size_t t = 0; t < a.tets.size(); ++t) m.region_tag.push_back(2);
  m.regions[2] = Region{};
  m.edges.clear();
  m.finalize();
  return m;
}

struct TorusFixture {
  TetMesh mesh;
  std::vector<int> toroidal_cycle;  // closed node path the long way around
  std::vector<int> poloidal_cycle;  // closed node path around the tube
  double major_radius, side;
};

// Solid torus of revolution: square cross-section of side `a` at major radius
// `r0`, revolved in `n_phi` steps, `m` cells across. Hexahedral cells are
// split into 12 tets through their centroid with min-index face diagonals,
// which is conformal for any neighbor. Genus 1 by construction.
inline TorusFixture make_torus(int m, int n_phi, double r0 = 2.0, double a = 1.0) {
  if (m < 1 || n_phi < 3) throw MeshError("torus fixture needs m >= 1 and n_phi >= 3");
  TorusFixture fx;
  fx.major_radius = r0;
  fx.side = a;
  TetMesh& mesh = fx.mesh;
  const int ring = (m + 1) * (m + 1);
  auto rid = [&](int aidx, int i, int j) { return (aidx % n_phi) * ring + i * (m + 1) + j; };
  for (int aidx = 0; aidx < n_phi; ++aidx) {
    double phi = 2.0 * kPi * aidx / n_phi;
    double c = std::cos(phi), s = std::sin(phi);
    for (int i = 0; i <= m; ++i)
      for (int j = 0; j <= m; ++j) {
        double rho = r0 - 0.5 * a + a * double(i) / m;
        double z = -0.5 * a + a * double(j) / m;
        mesh.nodes.push_back(Vec3(rho * c, rho * s, z));
      }
  }
  const int center_base = n_phi * ring;
  auto cid = [&](int aidx, int i, int j) { return center_base + (aidx * m + i) * m + j; };
  for (int aidx = 0; aidx < n_phi; ++aidx)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        Vec3 c = Vec3::Zero();
        for (int da = 0; da < 2; ++da)
          for (int di = 0; di < 2; ++di)
            for (int dj = 0; dj < 2; ++dj) c += mesh.nodes[rid(aidx + da, i + di, j + dj)];
        mesh.nodes.push_back(c / 8.0);
        (void)cid;
      }
  auto add_quad = [&](int v0, int v1, int v2, int v3, int center) {
    // split along the diagonal through the smallest node id
    int mn = std::min({v0, v1, v2, v3});
    if (mn == v0 || mn == v2) {
      mesh.tets.push_back({v0, v1, v2, center});
      mesh.tets.push_back({v0, v2, v3, center});
    } else {
      mesh.tets.push_back({v1, v2, v3, center});
      mesh.tets.push_back({v1, v3, v0, center});
    }
  };
  for (int aidx = 0; aidx < n_phi; ++aidx)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const int c = center_base + (aidx * m + i) * m + j;
        int v[2][2][2];  // [azimuth][i][j]
        for (int da = 0; da < 2; ++da)
          for (int di = 0; di < 2; ++di)
            for (int dj = 0; dj < 2; ++dj) v[da][di][dj] = rid(aidx + da, i + di, j + dj);
        add_quad(v[0][0][0], v[0][1][0], v[0][1][1], v[0][0][1], c);  // aidx face
        add_quad(v[1][0][0], v[1][0][1], v[1][1][1], v[1][1][0], c);  // aidx+1 face
        add_quad(v[0][0][0], v[0][0][1], v[1][0][1], v[1][0][0], c);  // inner rho face
        add_quad(v[0][1][0], v[1][1][0], v[1][1][1], v[0][1][1], c);  // outer rho face
        add_quad(v[0][0][0], v[1][0][0], v[1][1][0], v[0][1][0], c);  // bottom z face
        add_quad(v[0][0][1], v[0][1][1], v[1][1][1], v[1][0][1], c);  // top z face
      }
  mesh.region_tag.assign(mesh.tets.size(), 1);
  mesh.regions[1] = Region{};
  mesh.finalize();

  for (int aidx = 0; aidx <= n_phi; ++aidx) fx.toroidal_cycle.push_back(rid(aidx, 0, 0));
  for (int i = 0; i <= m; ++i) fx.poloidal_cycle.push_back(rid(0, i, 0));
  for (int j = 1; j <= m; ++j) fx.poloidal_cycle.push_back(rid(0, m, j));
  for (int i = m - 1; i >= 0; --i) fx.poloidal_cycle.push_back(rid(0, i, m));
  for (int j = m - 1; j >= 0; --j) fx.poloidal_cycle.push_back(rid(0, 0, j));
  return fx;
}

// Discrete harmonic (curl-free, non-gradient) edge field on the revolved
// torus: the principal azimuthal-angle increment per edge. Exactly curl-free
// per tet; spans the extra kernel direction of the non-gauged curl-curl form
// on a genus-1 domain. Used to form sources compatible with the un-augmented
// (gauged) formulation.
inline VecX torus_harmonic_edge_field(const TetMesh& mesh) {
  VecX h(mesh.n_edges());
  for (int e = 0; e < mesh.n_edges(); ++e) {
    const Vec3& a = mesh.nodes[mesh.edges[e][0]];
    const Vec3& b = mesh.nodes[mesh.edges[e][1]];
    double d = std::atan2(b[1], b[0]) - std::atan2(a[1], a[0]);
    if (d > kPi) d -= 2.0 * kPi;
    if (d < -kPi) d += 2.0 * kPi;
    h[e] = d;
  }
  return h;
}

}  // namespace fembem
