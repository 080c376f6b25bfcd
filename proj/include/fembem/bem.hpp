#pragma once

#include <functional>

#include "fembem/mesh.hpp"
#include "fembem/quadrature.hpp"

namespace fembem {

// Galerkin assembly of the boundary integral operators with the Laplace
// kernel U(r) = 1/(4 pi |r|).
//
// Spaces on the induced surface mesh (all lowest order):
//  * RT: one dof per surface edge, degree of freedom pi_l(v) = ∫_El (n x v)·ds
//    taken along the ascending edge direction, unit total flux.
//  * trace: tangential traces of the volume Whitney functions, one dof per
//    surface edge (same numbering as RT).
//  * P1: continuous hats, one dof per surface vertex.
//
// Surface curl convention: Curl_G f := grad_G f x n. With it the topological
// gradient G[l,k] = pi_l(Curl_G hat_k) is the signed edge-vertex incidence
// (+1 at the high-index end).

struct BemOptions {
  // Tensor Gauss orders for touching and separated panel pairs. Order 6 on
  // the singular transforms keeps the identical-panel single-layer blocks
  // within the 1e-3 trace-oracle budget on coarse meshes; order 4 leaves a
  // ~5e-3 residue there.
  int order_singular = 6;
  int order_far = 3;
};

inline double kernel_U(const Vec3& r) { return 1.0 / (4.0 * kPi * r.norm()); }
inline Vec3 kernel_gradU(const Vec3& r) {
  double rn = r.norm();
  return -r / (4.0 * kPi * rn * rn * rn);
}

struct TriData {
  Vec3 p[3];
  Vec3 n;
  double area = 0;
  Vec3 gl[3];        // in-plane gradients of the barycentric hats
  Vec3 curl_hat[3];  // Curl_G of hat at local vertex i (constant per triangle)
  double curl_w[3];  // curl_G of the trace-Whitney function of local edge l
  std::array<int, 3> edge{};
  std::array<double, 3> esign{};
  std::array<int, 3> vert{};
  std::array<int, 3> node{};
  int component = 0;
  Vec3 center;
  double diam = 0;
};

inline std::vector<TriData> build_tri_data(const SurfaceMesh& s, const std::vector<Vec3>& X) {
  std::vector<TriData> out(s.n_tris());
  for (int t = 0; t < s.n_tris(); ++t) {
    TriData& d = out[t];
    for (int i = 0; i < 3; ++i) {
      d.node[i] = s.tris[t][i];
      d.p[i] = X[d.node[i]];
      d.vert[i] = s.node_vertex[d.node[i]];
      d.edge[i] = s.tri_edge[t][i];
      d.esign[i] = s.tri_edge_sign[t][i];
    }
    Vec3 cr = (d.p[1] - d.p[0]).cross(d.p[2] - d.p[0]);
    double twoA = cr.norm();
    if (!(twoA > 0)) throw AssemblyError("degenerate surface triangle in assembly");
    d.area = 0.5 * twoA;
    d.n = cr / twoA;
    for (int i = 0; i < 3; ++i) {
      d.gl[i] = d.n.cross(d.p[(i + 2) % 3] - d.p[(i + 1) % 3]) / twoA;
      d.curl_hat[i] = d.gl[i].cross(d.n);
    }
    for (int l = 0; l < 3; ++l)
      d.curl_w[l] = 2.0 * d.esign[l] * d.gl[l].cross(d.gl[(l + 1) % 3]).dot(d.n);
    d.center = (d.p[0] + d.p[1] + d.p[2]) / 3.0;
    d.diam = std::max({(d.p[1] - d.p[0]).norm(), (d.p[2] - d.p[1]).norm(),
                       (d.p[0] - d.p[2]).norm()});
    d.component = s.tri_component[t];
  }
  return out;
}

// RT basis function of local edge l at x (within the triangle's plane)
inline Vec3 rt_value(const TriData& d, int l, const Vec3& x) {
  return d.esign[l] * (x - d.p[(l + 2) % 3]) / (2.0 * d.area);
}

// tangential trace of the Whitney function of local edge l at barycentric b
inline Vec3 tracew_value(const TriData& d, int l, const double b[3]) {
  int i = l, j = (l + 1) % 3;
  return d.esign[l] * (b[i] * d.gl[j] - b[j] * d.gl[i]);
}

struct PairSetup {
  PairKind kind;
  std::array<int, 3> px{0, 1, 2};  // permuted slot -> original local slot
  std::array<int, 3> py{0, 1, 2};
};

inline PairSetup classify_pair(const TriData& a, const TriData& b, bool same_tri) {
  PairSetup ps;
  if (same_tri) {
    ps.kind = PairKind::Identical;
    return ps;
  }
  int shared_a[3], shared_b[3], n_shared = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (a.node[i] == b.node[j]) {
        shared_a[n_shared] = i;
        shared_b[n_shared] = j;
        ++n_shared;
      }
  if (n_shared == 0) {
    ps.kind = PairKind::Separated;
    return ps;
  }
  if (n_shared == 1) {
    ps.kind = PairKind::SharedVertex;
    ps.px = {shared_a[0], (shared_a[0] + 1) % 3, (shared_a[0] + 2) % 3};
    ps.py = {shared_b[0], (shared_b[0] + 1) % 3, (shared_b[0] + 2) % 3};
    return ps;
  }
  if (n_shared == 2) {
    ps.kind = PairKind::SharedEdge;
    ps.px = {shared_a[0], shared_a[1], 3 - shared_a[0] - shared_a[1]};
    ps.py = {shared_b[0], shared_b[1], 3 - shared_b[0] - shared_b[1]};
    return ps;
  }
  throw AssemblyError("distinct triangles sharing three vertices");
}

namespace detail {

struct MappedPoint {
  Vec3 x, y;
  double bx[3], by[3];  // barycentric in original local slots
  double w;             // includes both area factors
};

// Expands the pair rule into world coordinates; returns by value into a
// caller-provided buffer to avoid reallocation.
inline void map_pair_points(const TriData& ta, const TriData& tb, const PairSetup& ps,
                            const std::vector<PairQuadPoint>& rule,
                            std::vector<MappedPoint>& buf) {
  buf.clear();
  buf.reserve(rule.size());
  const double scale = 4.0 * ta.area * tb.area;
  for (const auto& q : rule) {
    MappedPoint m;
    for (int k = 0; k < 3; ++k) {
      m.bx[ps.px[k]] = q.bx[k];
      m.by[ps.py[k]] = q.by[k];
    }
    m.x = m.bx[0] * ta.p[0] + m.bx[1] * ta.p[1] + m.bx[2] * ta.p[2];
    m.y = m.by[0] * tb.p[0] + m.by[1] * tb.p[1] + m.by[2] * tb.p[2];
    m.w = scale * q.w;
    buf.push_back(m);
  }
}

inline const std::vector<PairQuadPoint>& rule_for(PairKind kind, const BemOptions& opt) {
  return pair_rule(kind, kind == PairKind::Separated ? opt.order_far : opt.order_singular);
}

}  // namespace detail

// Per-pair Galerkin contributions. A workspace keeps the mapped-point buffer
// alive across pairs; each worker thread owns one.
struct PairWorkspace {
  std::vector<detail::MappedPoint> buf;
};

// RT x RT single-layer block of one ordered pair
inline void pair_single_layer(const TriData& A, const TriData& B, bool same_tri,
                              const BemOptions& opt, PairWorkspace& ws, double out[3][3]) {
  PairSetup ps = classify_pair(A, B, same_tri);
  detail::map_pair_points(A, B, ps, detail::rule_for(ps.kind, opt), ws.buf);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) out[a][b] = 0;
  for (const auto& m : ws.buf) {
    const double u = kernel_U(m.x - m.y) * m.w;
    Vec3 fx[3], fy[3];
    for (int a = 0; a < 3; ++a) fx[a] = rt_value(A, a, m.x);
    for (int b = 0; b < 3; ++b) fy[b] = rt_value(B, b, m.y);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) out[a][b] += u * fx[a].dot(fy[b]);
  }
}

// RT test x trace trial principal-value double-layer block of one ordered
// pair of distinct triangles. Identical flat panels are exactly zero (the
// kernel lies along the normal there) and must be skipped by the caller.
inline void pair_double_layer_pv(const TriData& A, const TriData& B, const BemOptions& opt,
                                 PairWorkspace& ws, double out[3][3]) {
  PairSetup ps = classify_pair(A, B, false);
  detail::map_pair_points(A, B, ps, detail::rule_for(ps.kind, opt), ws.buf);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) out[a][b] = 0;
  for (const auto& m : ws.buf) {
    const Vec3 g = kernel_gradU(m.x - m.y) * m.w;
    Vec3 fx[3], cy[3];
    for (int a = 0; a < 3; ++a) fx[a] = rt_value(A, a, m.x);
    for (int b = 0; b < 3; ++b) cy[b] = B.n.cross(tracew_value(B, b, m.by));
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) out[a][b] += fx[a].dot(g.cross(cy[b]));
  }
}

// Maxwell single layer V on RT x RT: V[l,m] = ∫∫ U(x-y) phi_l(x)·phi_m(y).
inline MatX assemble_single_layer(const SurfaceMesh& s, const std::vector<Vec3>& X,
                                  const BemOptions& opt = {}) {
  const auto tris = build_tri_data(s, X);
  MatX V = MatX::Zero(s.n_edges(), s.n_edges());
  parallel_for_chunks(tris.size(), [&](std::size_t lo, std::size_t hi) {
    PairWorkspace ws;
    double acc[3][3];
    for (std::size_t tx = lo; tx < hi; ++tx)
      for (std::size_t ty = 0; ty < tris.size(); ++ty) {
        const TriData& A = tris[tx];
        const TriData& B = tris[ty];
        pair_single_layer(A, B, tx == ty, opt, ws, acc);
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) V(A.edge[a], B.edge[b]) += acc[a][b];
      }
  });
  // the kernel is symmetric; remove the (x,y)-asymmetry of the touching-pair
  // transforms so downstream blocks are symmetric to rounding
  V = 0.5 * (V + V.transpose()).eval();
  return V;
}

// <phi_l, w_i> over the surface (RT test, trace trial); exact for the linear
// integrands via the degree-2 rule.
inline SpMat surface_vector_mass(const SurfaceMesh& s, const std::vector<Vec3>& X) {
  const auto tris = build_tri_data(s, X);
  std::vector<Eigen::Triplet<double>> trip;
  const auto& rule = tri_rule(2);
  for (const auto& d : tris) {
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        double v = 0;
        for (const auto& q : rule) {
          Vec3 x = q.b[0] * d.p[0] + q.b[1] * d.p[1] + q.b[2] * d.p[2];
          v += q.w * rt_value(d, a, x).dot(tracew_value(d, b, q.b));
        }
        trip.emplace_back(d.edge[a], d.edge[b], d.area * v);
      }
  }
  SpMat M(s.n_edges(), s.n_edges());
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

// Principal-value part of the Maxwell double layer, RT test x trace trial:
//   pv[l,i] = ∫∫ phi_l(x) · [grad_x U(x-y) x (n(y) x w_i(y))].
// Identical flat panels contribute exactly zero and are skipped.
inline MatX assemble_double_layer_pv(const SurfaceMesh& s, const std::vector<Vec3>& X,
                                     const BemOptions& opt = {}) {
  const auto tris = build_tri_data(s, X);
  MatX K = MatX::Zero(s.n_edges(), s.n_edges());
  parallel_for_chunks(tris.size(), [&](std::size_t lo, std::size_t hi) {
    PairWorkspace ws;
    double acc[3][3];
    for (std::size_t tx = lo; tx < hi; ++tx)
      for (std::size_t ty = 0; ty < tris.size(); ++ty) {
        if (tx == ty) continue;
        const TriData& A = tris[tx];
        const TriData& B = tris[ty];
        pair_double_layer_pv(A, B, opt, ws, acc);
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) K(A.edge[a], B.edge[b]) += acc[a][b];
      }
  });
  return K;
}

// Exterior-trace Maxwell double layer K = pv + Id/2 (the jump term of the
// exterior Dirichlet trace). The coupled system uses K - Id.
inline MatX assemble_double_layer(const SurfaceMesh& s, const std::vector<Vec3>& X,
                                  const BemOptions& opt = {}) {
  MatX K = assemble_double_layer_pv(s, X, opt);
  K += 0.5 * MatX(surface_vector_mass(s, X));
  return K;
}

// Panel matrix of the scalar single layer with piecewise-constant densities:
// P[s,t] = ∫_Ts ∫_Tt U(x-y).
inline MatX assemble_panel_sl(const SurfaceMesh& s, const std::vector<Vec3>& X,
                              const BemOptions& opt = {}) {
  const auto tris = build_tri_data(s, X);
  MatX P = MatX::Zero(s.n_tris(), s.n_tris());
  parallel_for_chunks(tris.size(), [&](std::size_t lo, std::size_t hi) {
    std::vector<detail::MappedPoint> buf;
    for (std::size_t tx = lo; tx < hi; ++tx)
      for (std::size_t ty = 0; ty < tris.size(); ++ty) {
        PairSetup ps = classify_pair(tris[tx], tris[ty], tx == ty);
        detail::map_pair_points(tris[tx], tris[ty], ps, detail::rule_for(ps.kind, opt), buf);
        double acc = 0;
        for (const auto& m : buf) acc += kernel_U(m.x - m.y) * m.w;
        P(tx, ty) += acc;
      }
  });
  P = 0.5 * (P + P.transpose()).eval();
  return P;
}

// Per-triangle surface curl of trace-space coefficient vectors:
// (C t)_T = curl_G(sum_i t_i w_i)|_T, one constant per triangle.
inline SpMat curl_incidence(const SurfaceMesh& s, const std::vector<Vec3>& X) {
  const auto tris = build_tri_data(s, X);
  std::vector<Eigen::Triplet<double>> trip;
  for (int t = 0; t < s.n_tris(); ++t)
    for (int l = 0; l < 3; ++l) trip.emplace_back(t, tris[t].edge[l], tris[t].curl_w[l]);
  SpMat C(s.n_tris(), s.n_edges());
  C.setFromTriplets(trip.begin(), trip.end());
  return C;
}

// Hypersingular operator on the trace space via the integration-by-parts
// identity <N w, w'> = -∫∫ U(x-y) curl_G w'(x) curl_G w(y); symmetric and
// negative semidefinite. Validated against the off-surface trace oracle.
inline MatX assemble_hypersingular(const SurfaceMesh& s, const std::vector<Vec3>& X,
                                   const BemOptions& opt = {}) {
  MatX P = assemble_panel_sl(s, X, opt);
  SpMat C = curl_incidence(s, X);
  MatX PC = P * C;
  return -MatX(C.transpose() * PC);
}

// Topological gradient G[l,k] = pi_l(Curl_G hat_k): signed edge-vertex
// incidence, +1 at the ascending end.
inline SpMat topological_gradient(const SurfaceMesh& s) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(s.n_edges() * 2);
  for (int e = 0; e < s.n_edges(); ++e) {
    trip.emplace_back(e, s.node_vertex[s.edges[e][0]], -1.0);
    trip.emplace_back(e, s.node_vertex[s.edges[e][1]], 1.0);
  }
  SpMat G(s.n_edges(), s.n_vertices());
  G.setFromTriplets(trip.begin(), trip.end());
  return G;
}

// Fused assembly of the reduced blocks the coupled system needs, restricted
// to one ordered component pair (test component ci, trial component cj):
//   P  [s,t] = ∫∫ U                       (panel single layer)
//   BV [k,k']= ∫∫ U q_k(x)·q_k'(y)        with q_k = Curl_G hat_k
//   BKrc[k,i]= ∫∫ q_k(x)·[grad U x (n x w_i(y))]
//   BKcr[k,i]= same with test on cj, trial on ci (filled when ci != cj)
// Exploits that q_k is constant per triangle, so only panel scalars and one
// vector moment per trial function are integrated.
struct FusedBlocks {
  MatX P, BV, BKrc, BKcr;
};

inline FusedBlocks assemble_fused_blocks(const SurfaceMesh& s, const std::vector<Vec3>& X,
                                         int ci, int cj, const BemOptions& opt = {}) {
  const auto tris = build_tri_data(s, X);
  const auto tr = s.tri_range[ci], tc = s.tri_range[cj];
  const auto vr = s.vertex_range[ci], vc = s.vertex_range[cj];
  const auto er = s.edge_range[ci], ec = s.edge_range[cj];
  const int nTr = tr[1] - tr[0], nTc = tc[1] - tc[0];
  FusedBlocks out;
  out.P = MatX::Zero(nTr, nTc);
  out.BV = MatX::Zero(vr[1] - vr[0], vc[1] - vc[0]);
  out.BKrc = MatX::Zero(vr[1] - vr[0], ec[1] - ec[0]);
  if (ci != cj) out.BKcr = MatX::Zero(vc[1] - vc[0], er[1] - er[0]);

  parallel_for_chunks(nTr, [&](std::size_t lo, std::size_t hi) {
    std::vector<detail::MappedPoint> buf;
    for (std::size_t r = lo; r < hi; ++r) {
      const int tx = tr[0] + static_cast<int>(r);
      for (int ty = tc[0]; ty < tc[1]; ++ty) {
        const TriData& A = tris[tx];
        const TriData& B = tris[ty];
        PairSetup ps = classify_pair(A, B, tx == ty);
        detail::map_pair_points(A, B, ps, detail::rule_for(ps.kind, opt), buf);
        double su = 0;
        Vec3 mb[3] = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
        Vec3 ma[3] = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
        const bool mirror = (ci != cj);
        const bool touching = (ps.kind != PairKind::Identical);
        for (const auto& m : buf) {
          su += kernel_U(m.x - m.y) * m.w;
          if (touching) {
            const Vec3 g = kernel_gradU(m.x - m.y) * m.w;
            for (int b = 0; b < 3; ++b)
              mb[b] += g.cross(B.n.cross(tracew_value(B, b, m.by)));
            if (mirror)
              for (int a = 0; a < 3; ++a)
                ma[a] -= g.cross(A.n.cross(tracew_value(A, a, m.bx)));
          }
        }
        out.P(tx - tr[0], ty - tc[0]) += su;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            out.BV(A.vert[i] - vr[0], B.vert[j] - vc[0]) += su * A.curl_hat[i].dot(B.curl_hat[j]);
        if (touching) {
          for (int i = 0; i < 3; ++i)
            for (int b = 0; b < 3; ++b)
              out.BKrc(A.vert[i] - vr[0], B.edge[b] - ec[0]) += A.curl_hat[i].dot(mb[b]);
          if (mirror)
            for (int j = 0; j < 3; ++j)
              for (int a = 0; a < 3; ++a)
                out.BKcr(B.vert[j] - vc[0], A.edge[a] - er[0]) += B.curl_hat[j].dot(ma[a]);
        }
      }
    }
  });
  if (ci == cj) {
    out.P = 0.5 * (out.P + out.P.transpose()).eval();
    out.BV = 0.5 * (out.BV + out.BV.transpose()).eval();
  }
  return out;
}

// Contraction of the single and double layer with a fixed RT density (the
// cohomology current sheets): returns V eta on RT test functions and the
// principal-value part of <(K - Id) w_i, eta> on trace trial functions.
struct SheetContraction {
  VecX V_eta;       // size n_edges: <V eta, phi_l>
  VecX KmiT_eta_pv;  // size n_edges: pv part of <K w_i, eta>
};

inline SheetContraction contract_sheet(const SurfaceMesh& s, const std::vector<Vec3>& X,
                                       const VecX& eta, const BemOptions& opt = {}) {
  const auto tris = build_tri_data(s, X);
  SheetContraction out;
  out.V_eta = VecX::Zero(s.n_edges());
  out.KmiT_eta_pv = VecX::Zero(s.n_edges());
  // triangles with non-zero sheet coefficients
  std::vector<int> support;
  for (int t = 0; t < s.n_tris(); ++t)
    if (eta[tris[t].edge[0]] != 0.0 || eta[tris[t].edge[1]] != 0.0 ||
        eta[tris[t].edge[2]] != 0.0)
      support.push_back(t);
  std::vector<detail::MappedPoint> buf;
  for (int tx = 0; tx < s.n_tris(); ++tx) {
    const TriData& A = tris[tx];
    const bool x_in_support =
        eta[A.edge[0]] != 0.0 || eta[A.edge[1]] != 0.0 || eta[A.edge[2]] != 0.0;
    for (int ty = 0; ty < s.n_tris(); ++ty) {
      const TriData& B = tris[ty];
      const bool y_in_support = std::binary_search(support.begin(), support.end(), ty);
      if (!x_in_support && !y_in_support) continue;
      PairSetup ps = classify_pair(A, B, tx == ty);
      detail::map_pair_points(A, B, ps, detail::rule_for(ps.kind, opt), buf);
      double av[3] = {0, 0, 0};
      double avm[3] = {0, 0, 0};
      double ak[3] = {0, 0, 0};
      const bool do_k = x_in_support && (ps.kind != PairKind::Identical);
      for (const auto& m : buf) {
        const double u = kernel_U(m.x - m.y) * m.w;
        if (y_in_support) {
          Vec3 ey = Vec3::Zero();  // eta on the trial panel
          for (int l = 0; l < 3; ++l)
            if (double c = eta[B.edge[l]]; c != 0.0) ey += c * rt_value(B, l, m.y);
          for (int a = 0; a < 3; ++a) av[a] += u * rt_value(A, a, m.x).dot(ey);
        }
        Vec3 ex = Vec3::Zero();
        if (x_in_support)
          for (int l = 0; l < 3; ++l)
            if (double c = eta[A.edge[l]]; c != 0.0) ex += c * rt_value(A, l, m.x);
        if (x_in_support) {
          // mirrored single-layer contraction: matches the symmetrized V
          for (int b = 0; b < 3; ++b) avm[b] += u * rt_value(B, b, m.y).dot(ex);
        }
        if (do_k) {
          // test density eta on x against trace trial functions on y
          const Vec3 g = kernel_gradU(m.x - m.y) * m.w;
          for (int b = 0; b < 3; ++b)
            ak[b] += ex.dot(g.cross(B.n.cross(tracew_value(B, b, m.by))));
        }
      }
      if (y_in_support)
        for (int a = 0; a < 3; ++a) out.V_eta[A.edge[a]] += 0.5 * av[a];
      if (x_in_support)
        for (int b = 0; b < 3; ++b) out.V_eta[B.edge[b]] += 0.5 * avm[b];
      if (do_k)
        for (int b = 0; b < 3; ++b) out.KmiT_eta_pv[B.edge[b]] += ak[b];
    }
  }
  return out;
}

inline double point_triangle_distance(const Vec3& x, const Vec3& a, const Vec3& b, const Vec3& c) {
  // project onto the plane, clamp into the triangle via edge regions
  Vec3 ab = b - a, ac = c - a, ap = x - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return (x - a).norm();
  Vec3 bp = x - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return (x - b).norm();
  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    double v = d1 / (d1 - d3);
    return (x - (a + v * ab)).norm();
  }
  Vec3 cp = x - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return (x - c).norm();
  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    double w = d2 / (d2 - d6);
    return (x - (a + w * ac)).norm();
  }
  double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (x - (b + w * (c - b))).norm();
  }
  double denom = 1.0 / (va + vb + vc);
  double v = vb * denom, w = vc * denom;
  return (x - (a + v * ab + w * ac)).norm();
}

// Magnetic flux in the air region from the Cauchy data, via the curl of the
// representation formula (the gradient term drops):
//   B(x) = -∫ grad_x U(x-y) x lambda(y) - ∫ grad_x U(x-y) curl_G w(y).
// Points closer than half a local mesh size to the surface are rejected.
inline std::vector<Vec3> evaluate_exterior_B(const SurfaceMesh& s, const std::vector<Vec3>& X,
                                             const VecX& dirichlet_trace, const VecX& neumann_rt,
                                             const std::vector<Vec3>& points,
                                             int quad_degree = 5) {
  const auto tris = build_tri_data(s, X);
  const auto& rule = tri_rule(quad_degree);
  for (const auto& x : points)
    for (const auto& d : tris) {
      if ((x - d.center).norm() > d.diam + 0.5 * d.diam) continue;
      if (point_triangle_distance(x, d.p[0], d.p[1], d.p[2]) < 0.5 * d.diam)
        throw NearFieldError("evaluation point too close to the surface for reliable quadrature");
    }
  std::vector<Vec3> out(points.size(), Vec3::Zero());
  parallel_for_chunks(points.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t pi = lo; pi < hi; ++pi) {
      Vec3 acc = Vec3::Zero();
      for (const auto& d : tris) {
        double cw = 0;
        for (int l = 0; l < 3; ++l) cw += dirichlet_trace[d.edge[l]] * d.curl_w[l];
        for (const auto& q : rule) {
          Vec3 y = q.b[0] * d.p[0] + q.b[1] * d.p[1] + q.b[2] * d.p[2];
          Vec3 lam = Vec3::Zero();
          for (int l = 0; l < 3; ++l)
            if (double c = neumann_rt[d.edge[l]]; c != 0.0) lam += c * rt_value(d, l, y);
          Vec3 g = kernel_gradU(points[pi] - y);
          acc -= d.area * q.w * (g.cross(lam) + g * cw);
        }
      }
      out[pi] = acc;
    }
  });
  return out;
}

// Interpolation helpers (edge circulations and RT fluxes of smooth fields).
inline VecX interpolate_trace(const SurfaceMesh& s, const std::vector<Vec3>& X,
                              const std::function<Vec3(const Vec3&)>& field) {
  const auto g2 = gauss_legendre(3);
  VecX out(s.n_edges());
  for (int e = 0; e < s.n_edges(); ++e) {
    const Vec3 a = X[s.edges[e][0]], b = X[s.edges[e][1]];
    double v = 0;
    for (const auto& q : g2) v += q.w * field(a + q.x * (b - a)).dot(b - a);
    out[e] = v;
  }
  return out;
}

inline VecX interpolate_rt(const SurfaceMesh& s, const std::vector<Vec3>& X,
                           const std::function<Vec3(const Vec3&)>& field) {
  const auto tris = build_tri_data(s, X);
  const auto g2 = gauss_legendre(3);
  VecX out(s.n_edges());
  for (int e = 0; e < s.n_edges(); ++e) {
    const Vec3 a = X[s.edges[e][0]], b = X[s.edges[e][1]];
    // average the two adjacent normals for the (smooth-data) dof functional
    Vec3 n = Vec3::Zero();
    for (int t : s.edge_tri[e]) {
      Vec3 cr = (X[s.tris[t][1]] - X[s.tris[t][0]]).cross(X[s.tris[t][2]] - X[s.tris[t][0]]);
      n += cr.normalized();
    }
    n.normalize();
    double v = 0;
    for (const auto& q : g2) v += q.w * n.cross(field(a + q.x * (b - a))).dot(b - a);
    out[e] = v;
  }
  return out;
}

}  // namespace fembem
