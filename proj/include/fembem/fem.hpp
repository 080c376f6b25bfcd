#pragma once

#include <Eigen/SparseCholesky>
#include <functional>

#include "fembem/mesh.hpp"
#include "fembem/quadrature.hpp"

namespace fembem {

// Lowest-order Nédélec space: one dof per mesh edge, oriented low index to
// high index. The local-to-global map and signs live on the TetMesh.
struct EdgeSpace {
  const TetMesh* mesh = nullptr;
  int n_dofs = 0;
};

inline EdgeSpace make_edge_space(const TetMesh& mesh) { return {&mesh, mesh.n_edges()}; }

// Barycentric gradients and volume of a tet.
inline void tet_grads(const TetMesh& mesh, int t, std::array<Vec3, 4>& g, double& vol) {
  const auto& k = mesh.tets[t];
  Mat3 J;
  J.col(0) = mesh.nodes[k[1]] - mesh.nodes[k[0]];
  J.col(1) = mesh.nodes[k[2]] - mesh.nodes[k[0]];
  J.col(2) = mesh.nodes[k[3]] - mesh.nodes[k[0]];
  const double det = J.determinant();
  vol = det / 6.0;
  Mat3 Jinv = J.inverse();
  g[1] = Jinv.row(0);
  g[2] = Jinv.row(1);
  g[3] = Jinv.row(2);
  g[0] = -(g[1] + g[2] + g[3]);
}

// curl of the global Whitney function of local edge le (constant per tet)
inline Vec3 whitney_curl(const TetMesh& mesh, int t, int le, const std::array<Vec3, 4>& g) {
  const auto& e = TetMesh::kLocalEdge[le];
  return 2.0 * mesh.tet_edge_sign[t][le] * g[e[0]].cross(g[e[1]]);
}

inline Vec3 whitney_value(const TetMesh& mesh, int t, int le, const std::array<Vec3, 4>& g,
                          const double lambda[4]) {
  const auto& e = TetMesh::kLocalEdge[le];
  Vec3 v = lambda[e[0]] * g[e[1]] - lambda[e[1]] * g[e[0]];
  return double(mesh.tet_edge_sign[t][le]) * v;
}

// <mu_r^-1 curl u, curl v> over the mesh; symmetric positive semidefinite,
// discrete gradients span the kernel. Element matrices are computed in
// parallel and reduced in tet order, so the result is reproducible for any
// thread count.
inline SpMat assemble_curl_curl(const EdgeSpace& space, const TetMesh& mesh) {
  const int nt = mesh.n_tets();
  std::vector<Eigen::Matrix<double, 6, 6>> elem(nt);
  std::vector<double> mu_inv(nt);
  for (int t = 0; t < nt; ++t) {
    const Region& reg = mesh.region(t);
    if (!(reg.mu_r > 0.0))
      throw AssemblyError("non-positive mu_r in region " + std::to_string(mesh.region_tag[t]));
    mu_inv[t] = 1.0 / reg.mu_r;
  }
  parallel_for_chunks(nt, [&](std::size_t lo, std::size_t hi) {
    std::array<Vec3, 4> g;
    double vol;
    for (std::size_t t = lo; t < hi; ++t) {
      tet_grads(mesh, static_cast<int>(t), g, vol);
      std::array<Vec3, 6> curls;
      for (int le = 0; le < 6; ++le) curls[le] = whitney_curl(mesh, static_cast<int>(t), le, g);
      for (int i = 0; i < 6; ++i)
        for (int j = i; j < 6; ++j) {
          double v = mu_inv[t] * vol * curls[i].dot(curls[j]);
          elem[t](i, j) = v;
          elem[t](j, i) = v;
        }
    }
  });
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(nt) * 36);
  for (int t = 0; t < nt; ++t)
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        trip.emplace_back(mesh.tet_edge[t][i], mesh.tet_edge[t][j], elem[t](i, j));
  SpMat A(space.n_dofs, space.n_dofs);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

// Right-hand side mu0 (<j, v> + <M, curl v>). The current density is the
// per-region constant unless `j_field` is given, in which case it is sampled
// at the quadrature points of a degree-2 rule.
inline VecX assemble_source(const EdgeSpace& space, const TetMesh& mesh,
                            const std::function<Vec3(const Vec3&)>& j_field = nullptr) {
  VecX f = VecX::Zero(space.n_dofs);
  const auto& rule = tet_rule(2);
  std::array<Vec3, 4> g;
  double vol;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const Region& reg = mesh.region(t);
    tet_grads(mesh, t, g, vol);
    const auto& k = mesh.tets[t];
    for (int le = 0; le < 6; ++le) {
      const int dof = mesh.tet_edge[t][le];
      double val = kMu0 * vol * reg.magnetization.dot(whitney_curl(mesh, t, le, g));
      for (const auto& q : rule) {
        Vec3 x = q.b[0] * mesh.nodes[k[0]] + q.b[1] * mesh.nodes[k[1]] +
                 q.b[2] * mesh.nodes[k[2]] + q.b[3] * mesh.nodes[k[3]];
        Vec3 j = j_field ? j_field(x) : reg.current_density;
        val += kMu0 * vol * q.w * j.dot(whitney_value(mesh, t, le, g, q.b));
      }
      f[dof] += val;
    }
  }
  return f;
}

// Boolean restriction matrix extracting boundary edge coefficients in surface
// ordering: one 1 per row.
inline SpMat trace_restriction(const EdgeSpace& space, const SurfaceMesh& surf) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(surf.n_edges());
  for (int e = 0; e < surf.n_edges(); ++e) {
    int ve = surf.edge_volume_edge[e];
    if (ve < 0 || ve >= space.n_dofs)
      throw AssemblyError("surface edge without matching volume edge");
    trip.emplace_back(e, ve, 1.0);
  }
  SpMat R(surf.n_edges(), space.n_dofs);
  R.setFromTriplets(trip.begin(), trip.end());
  return R;
}

// Signed edge-node incidence: (Gv h)_e = h_b - h_a for edge e = (a,b), a < b.
// Columns span the discrete gradient fields, i.e. the kernel of the curl-curl
// form.
inline SpMat gradient_incidence(const TetMesh& mesh) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh.n_edges() * 2);
  for (int e = 0; e < mesh.n_edges(); ++e) {
    trip.emplace_back(e, mesh.edges[e][0], -1.0);
    trip.emplace_back(e, mesh.edges[e][1], 1.0);
  }
  SpMat G(mesh.n_edges(), mesh.n_nodes());
  G.setFromTriplets(trip.begin(), trip.end());
  return G;
}

// Removes the discrete-gradient component of a source vector so that the
// non-gauged curl-curl block stays consistent: solves the nodal graph
// Laplacian Gv^T Gv c = Gv^T f (one node pinned per component) and subtracts
// Gv c. Magnetization sources are compatible already; prescribed currents in
// general are not.
inline void project_solenoidal(const TetMesh& mesh, VecX& f) {
  SpMat Gv = gradient_incidence(mesh);
  SpMat L = SpMat(Gv.transpose()) * Gv;
  VecX rhs = Gv.transpose() * f;
  // ground one node per component (the solution only matters up to constants)
  std::vector<char> pinned(mesh.n_nodes(), 0);
  std::vector<int> seen(mesh.n_components, 0);
  for (int v = 0; v < mesh.n_nodes(); ++v) {
    int c = mesh.node_component[v];
    if (c >= 0 && !seen[c]) {
      seen[c] = 1;
      pinned[v] = 1;
      rhs[v] = 0.0;
    }
  }
  for (int k = 0; k < L.outerSize(); ++k)
    for (SpMat::InnerIterator it(L, k); it; ++it) {
      if (pinned[it.row()] || pinned[it.col()])
        it.valueRef() = (it.row() == it.col()) ? 1.0 : 0.0;
    }
  Eigen::SimplicialLDLT<SpMat> ldlt(L);
  if (ldlt.info() != Eigen::Success) throw AssemblyError("source projection factorization failed");
  VecX c = ldlt.solve(rhs);
  f -= Gv * c;
}

}  // namespace fembem
