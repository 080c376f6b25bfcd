#pragma once

#include <Eigen/Cholesky>
#include <memory>
#include <queue>

#include "fembem/bem.hpp"
#include "fembem/fem.hpp"

namespace fembem {

struct CycleError : std::runtime_error { using std::runtime_error::runtime_error; };
struct MotionError : std::runtime_error { using std::runtime_error::runtime_error; };

// Divergence-free RT surface field with a unit circulation jump across a
// user-supplied homology cycle, built as the surface curl of a 0/1 vertex
// cochain that jumps across the cycle. All invariants hold in integer
// arithmetic.
struct CurrentSheet {
  std::vector<int> cycle;  // closed node path (first vertex not repeated)
  VecX eta;                // RT coefficients in {-1, 0, +1}
  int component = 0;
  double dual_circulation = 0;  // normalized to +1
  std::vector<int> dual_tris;   // the dual cycle used for the circulation
};

namespace detail {

// theta branch value of triangle t at node v for the sheet of `left_tris`
// (triangles in the left fan of a cycle vertex)
struct SheetCochain {
  // per cycle vertex: the set of left-fan triangles
  std::map<int, std::vector<char>> left;  // node -> indicator over triangles

  double theta(int tri, int node) const {
    auto it = left.find(node);
    if (it == left.end()) return 0.0;
    return it->second[tri] ? 1.0 : 0.0;
  }
};

}  // namespace detail

inline CurrentSheet build_current_sheet(const SurfaceMesh& s, const std::vector<Vec3>& X,
                                        std::vector<int> cycle) {
  if (cycle.size() >= 2 && cycle.front() == cycle.back()) cycle.pop_back();
  const int n = static_cast<int>(cycle.size());
  if (n < 3) throw CycleError("cycle must visit at least three vertices");
  {
    std::vector<int> sorted = cycle;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw CycleError("cycle is self-intersecting");
  }
  CurrentSheet sheet;
  sheet.cycle = cycle;
  std::vector<int> cycle_edges(n);
  for (int i = 0; i < n; ++i) {
    int e = s.edge_index(cycle[i], cycle[(i + 1) % n]);
    if (e < 0) throw CycleError("cycle leg is not a surface edge");
    cycle_edges[i] = e;
    if (i == 0)
      sheet.component = s.edge_component[e];
    else if (s.edge_component[e] != sheet.component)
      throw CycleError("cycle spans more than one surface component");
  }
  std::vector<char> on_cycle_edge(s.n_edges(), 0);
  for (int e : cycle_edges) on_cycle_edge[e] = 1;

  // triangles around each mesh node
  std::vector<std::vector<int>> node_tris(X.size());
  for (int t = 0; t < s.n_tris(); ++t)
    for (int v : s.tris[t]) node_tris[v].push_back(t);

  auto third_vertex = [&](int t, int a, int b) {
    for (int v : s.tris[t])
      if (v != a && v != b) return v;
    throw CycleError("internal: triangle without third vertex");
  };
  auto tri_normal = [&](int t) {
    return Vec3((X[s.tris[t][1]] - X[s.tris[t][0]])
                    .cross(X[s.tris[t][2]] - X[s.tris[t][0]])
                    .normalized());
  };
  // triangle adjacent to directed edge a->b lying on its left
  auto left_tri_of = [&](int a, int b) {
    int e = s.edge_index(a, b);
    for (int t : {s.edge_tri[e][0], s.edge_tri[e][1]}) {
      int w = third_vertex(t, a, b);
      if ((X[b] - X[a]).cross(X[w] - X[a]).dot(tri_normal(t)) > 0) return t;
    }
    throw CycleError("internal: no left triangle");
  };

  detail::SheetCochain coch;
  for (int i = 0; i < n; ++i) {
    const int vp = cycle[(i - 1 + n) % n], v = cycle[i], vn = cycle[(i + 1) % n];
    // walk the fan of v from the left triangle of (v -> vn) to the left
    // triangle of (vp -> v) without crossing the two cycle edges
    std::vector<char> mark(s.n_tris(), 0);
    int start = left_tri_of(v, vn);
    int stop = left_tri_of(vp, v);
    int cur = start;
    mark[cur] = 1;
    int guard = 0;
    while (cur != stop) {
      if (++guard > static_cast<int>(node_tris[v].size()) + 1)
        throw CycleError("cycle fan walk failed (non-manifold neighborhood?)");
      int next = -1;
      for (int l = 0; l < 3; ++l) {
        int e = s.tri_edge[cur][l];
        if (on_cycle_edge[e]) continue;
        if (s.edges[e][0] != v && s.edges[e][1] != v) continue;
        int other = s.edge_tri[e][0] == cur ? s.edge_tri[e][1] : s.edge_tri[e][0];
        if (!mark[other]) {
          next = other;
          break;
        }
        if (other == stop && stop == start) break;
      }
      if (next < 0) {
        if (mark[stop]) break;
        throw CycleError("cycle fan walk failed");
      }
      cur = next;
      mark[cur] = 1;
    }
    coch.left[v] = std::move(mark);
  }

  // RT coefficients from the branch differences; both adjacent triangles must
  // agree (single-valuedness off the cycle)
  sheet.eta = VecX::Zero(s.n_edges());
  for (int e = 0; e < s.n_edges(); ++e) {
    const int a = s.edges[e][0], b = s.edges[e][1];
    double v0 = coch.theta(s.edge_tri[e][0], b) - coch.theta(s.edge_tri[e][0], a);
    double v1 = coch.theta(s.edge_tri[e][1], b) - coch.theta(s.edge_tri[e][1], a);
    if (v0 != v1) throw CycleError("internal: sheet cochain is not single-valued");
    sheet.eta[e] = v0;
  }
  // exact divergence-free check
  for (int t = 0; t < s.n_tris(); ++t) {
    long div = 0;
    for (int l = 0; l < 3; ++l)
      div += static_cast<long>(s.tri_edge_sign[t][l]) *
             static_cast<long>(std::lround(sheet.eta[s.tri_edge[t][l]]));
    if (div != 0) throw CycleError("internal: sheet is not divergence free");
  }

  // homological triviality: eta in range(G) <=> the cycle bounds
  {
    SpMat G = topological_gradient(s);
    SpMat L = SpMat(G.transpose()) * G;
    for (int k = 0; k < L.outerSize(); ++k)
      for (SpMat::InnerIterator it(L, k); it; ++it)
        if (it.row() == it.col()) it.valueRef() += 1e-12;
    Eigen::SimplicialLDLT<SpMat> ldlt(L);
    VecX c = ldlt.solve(G.transpose() * sheet.eta);
    double resid = (G * c - sheet.eta).norm();
    if (resid <= 1e-6 * sheet.eta.norm())
      throw CycleError("trivial homology: the cycle bounds, its sheet is a surface curl");
  }

  // dual cycle: shortest triangle path from the right to the left triangle of
  // the first cycle edge that does not cross the cycle; exists iff the cycle
  // does not separate the surface
  {
    const int e0 = cycle_edges[0];
    const int a = cycle[0], b = cycle[1];
    int tl = left_tri_of(a, b);
    int tr = s.edge_tri[e0][0] == tl ? s.edge_tri[e0][1] : s.edge_tri[e0][0];
    std::vector<int> prev(s.n_tris(), -2);
    std::queue<int> q;
    q.push(tr);
    prev[tr] = -1;
    while (!q.empty() && prev[tl] == -2) {
      int cur = q.front();
      q.pop();
      for (int l = 0; l < 3; ++l) {
        int e = s.tri_edge[cur][l];
        if (on_cycle_edge[e]) continue;
        int other = s.edge_tri[e][0] == cur ? s.edge_tri[e][1] : s.edge_tri[e][0];
        if (prev[other] == -2) {
          prev[other] = cur;
          q.push(other);
        }
      }
    }
    if (prev[tl] == -2)
      throw CycleError("trivial homology: the cycle separates the surface");
    for (int t = tl; t != -1; t = prev[t]) sheet.dual_tris.push_back(t);
    std::reverse(sheet.dual_tris.begin(), sheet.dual_tris.end());  // tr .. tl
    // circulation of n x eta = grad theta along the closed dual polyline
    // through edge midpoints; exact in halves
    auto shared_edge = [&](int t1, int t2) {
      for (int l = 0; l < 3; ++l)
        if (s.edge_tri[s.tri_edge[t1][l]][0] == t2 || s.edge_tri[s.tri_edge[t1][l]][1] == t2)
          return s.tri_edge[t1][l];
      throw CycleError("internal: dual path without shared edge");
    };
    const int m = static_cast<int>(sheet.dual_tris.size());
    double circ = 0;
    for (int i = 0; i < m; ++i) {
      int t = sheet.dual_tris[i];
      int e_in = (i == 0) ? e0 : shared_edge(sheet.dual_tris[i - 1], t);
      int e_out = (i == m - 1) ? e0 : shared_edge(t, sheet.dual_tris[i + 1]);
      auto theta_mid = [&](int e) {
        return 0.5 * (coch.theta(t, s.edges[e][0]) + coch.theta(t, s.edges[e][1]));
      };
      circ += theta_mid(e_out) - theta_mid(e_in);
    }
    if (circ == -1.0) {
      sheet.eta = -sheet.eta;
      circ = 1.0;
    }
    if (circ != 1.0) throw CycleError("internal: dual circulation is not unit");
    sheet.dual_circulation = circ;
  }
  return sheet;
}

struct RigidMotion {
  int component = 0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  void validate() const {
    if ((rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-14)
      throw MotionError("rotation is not orthogonal");
    if (std::abs(rotation.determinant() - 1.0) > 1e-12)
      throw MotionError("rotation must be proper (det = +1)");
  }
};

// The symmetric block operator of the coupled problem,
//   S = [ A - R^T N R   R^T (K-Id)^T G ]
//       [ G^T (K-Id) R   -G^T V G      ]
// stored in reduced form: the hypersingular part as the panel matrix P with
// the curl incidence C (so -R^T N R = +R^T C^T P C R), the lower-left block
// fused into vertex space. BEM blocks are kept per component pair so a rigid
// motion only replaces the pairs touching the moved component. Immutable once
// assembled; matvec is const and thread-safe.
class CoupledSystem {
 public:
  std::shared_ptr<const TetMesh> mesh;
  std::shared_ptr<const SurfaceMesh> surf;
  std::shared_ptr<const SpMat> A;
  SpMat R, G, C, Mass;  // topology/metric maps (rigid-motion invariant)
  std::shared_ptr<const Eigen::SimplicialLDLT<SpMat>> surf_laplacian;  // pinned G^T G
  std::vector<char> surf_pin;
  std::shared_ptr<const Eigen::SimplicialLDLT<SpMat>> panel_gram;  // C C^T, regularized
  BemOptions options;
  int n_fem = 0, n_phi = 0;

  struct PairBlock {
    std::shared_ptr<const MatX> P, BV;
    std::shared_ptr<const MatX> BK_ij;  // test verts of i, trial edges of j
    std::shared_ptr<const MatX> BK_ji;  // null when i == j
  };
  std::vector<PairBlock> pairs;  // for i <= j, index pair_index(i, j)

  // cohomology extension (empty when no sheets)
  std::vector<CurrentSheet> sheets;
  MatX F_a, F_phi, H;
  std::shared_ptr<const Eigen::LDLT<MatX>> H_solver;

  int ncomp() const { return surf->n_components; }
  int n_sheets() const { return static_cast<int>(sheets.size()); }
  int dim() const { return n_fem + n_phi; }
  int dim_extended() const { return dim() + n_sheets(); }

  int pair_index(int i, int j) const {
    // stored for i <= j
    return i * ncomp() + j;
  }

  // Removes the surface-gradient component of trace coefficients (used for
  // the sheet couplings, whose test densities do sense harmonic traces).
  VecX project_out_gradients(const VecX& t) const {
    VecX rhs = G.transpose() * t;
    for (int k = 0; k < rhs.size(); ++k)
      if (surf_pin[k]) rhs[k] = 0.0;
    VecX c = surf_laplacian->solve(rhs);
    return t - G * c;
  }

  // Projects trace coefficients onto the curl-carrying complement of
  // ker(C) = {surface-curl-free traces} = gradients (+ harmonic traces on
  // higher-genus surfaces). The continuous (K - Id) coupling annihilates all
  // of ker(C) when tested against exact surface curls (Maue-type identity;
  // for harmonic traces the potential is a locally-gradient field whose
  // branch jumps integrate to zero against exact curls); quadrature breaks
  // that at the 1e-5 level and smears the system kernel, which stalls MINRES
  // and lets its residual estimate drift. Acting on the projected trace
  // restores an exact kernel at quadrature-error order. Symmetric, so the
  // block symmetry of S is untouched.
  VecX project_curl_carrying(const VecX& t) const {
    VecX w = panel_gram->solve(C * t);
    return C.transpose() * w;
  }

  // y = S x on the (a, phi) unknowns
  void matvec(const VecX& x, VecX& y) const {
    y.resize(dim());
    const auto a = x.head(n_fem);
    const auto phi = x.tail(n_phi);
    VecX ya = (*A) * a;
    VecX traw = R * a;       // surface-edge coefficients of the trace
    VecX t = project_curl_carrying(traw);
    VecX ct = C * traw;      // per-triangle surface curls (kills ker(C) exactly)
    VecX pt = VecX::Zero(surf->n_tris());
    VecX yphi = VecX::Zero(n_phi);
    VecX yt = VecX::Zero(t.size());  // image in trace-coefficient space
    const int nc = ncomp();
    for (int i = 0; i < nc; ++i) {
      const auto tri_i = surf->tri_range[i];
      const auto vr_i = surf->vertex_range[i];
      const auto er_i = surf->edge_range[i];
      for (int j = 0; j < nc; ++j) {
        const auto tri_j = surf->tri_range[j];
        const auto vr_j = surf->vertex_range[j];
        const auto er_j = surf->edge_range[j];
        const PairBlock& pb = pairs[pair_index(std::min(i, j), std::max(i, j))];
        // panel single layer (symmetric)
        if (i <= j)
          pt.segment(tri_i[0], tri_i[1] - tri_i[0]).noalias() +=
              (*pb.P) * ct.segment(tri_j[0], tri_j[1] - tri_j[0]);
        else
          pt.segment(tri_i[0], tri_i[1] - tri_i[0]).noalias() +=
              pb.P->transpose() * ct.segment(tri_j[0], tri_j[1] - tri_j[0]);
        // -G^T V G phi (BV symmetric)
        if (i <= j)
          yphi.segment(vr_i[0], vr_i[1] - vr_i[0]).noalias() -=
              (*pb.BV) * phi.segment(vr_j[0], vr_j[1] - vr_j[0]);
        else
          yphi.segment(vr_i[0], vr_i[1] - vr_i[0]).noalias() -=
              pb.BV->transpose() * phi.segment(vr_j[0], vr_j[1] - vr_j[0]);
        // principal-value coupling block (vertex test i, trace trial j)
        const MatX& bk_use = (i <= j) ? *pb.BK_ij : *pb.BK_ji;
        yphi.segment(vr_i[0], vr_i[1] - vr_i[0]).noalias() +=
            bk_use * t.segment(er_j[0], er_j[1] - er_j[0]);
        yt.segment(er_j[0], er_j[1] - er_j[0]).noalias() +=
            bk_use.transpose() * phi.segment(vr_i[0], vr_i[1] - vr_i[0]);
      }
    }
    // hypersingular part: + R^T C^T P C R a
    ya.noalias() += R.transpose() * (C.transpose() * pt);
    // mass part of (K - Id): -1/2 G^T Mass on the lower left and transpose
    VecX gm = G.transpose() * (Mass * t);
    yphi.noalias() -= 0.5 * gm;
    yt.noalias() -= 0.5 * (Mass.transpose() * (G * phi));
    ya.noalias() += R.transpose() * project_curl_carrying(yt);
    y.head(n_fem) = ya;
    y.tail(n_phi) = yphi;
  }

  // y = [S x + F alpha; F^T x + H alpha] on (a, phi, alpha)
  void matvec_extended(const VecX& x, VecX& y) const {
    const int m = n_sheets();
    y.resize(dim_extended());
    VecX sx;
    matvec(x.head(dim()), sx);
    if (m == 0) {
      y = sx;
      return;
    }
    const auto alpha = x.tail(m);
    sx.head(n_fem).noalias() += F_a * alpha;
    sx.tail(n_phi).noalias() += F_phi * alpha;
    y.head(dim()) = sx;
    y.tail(m) = F_a.transpose() * x.head(n_fem) + F_phi.transpose() * x.segment(n_fem, n_phi) +
                H * alpha;
  }

  // y = (S - F H^-1 F^T) x, the rank-M corrected operator applied on the fly
  void matvec_schur(const VecX& x, VecX& y) const {
    matvec(x, y);
    if (n_sheets() == 0) return;
    VecX ftx = F_a.transpose() * x.head(n_fem) + F_phi.transpose() * x.tail(n_phi);
    VecX alpha = H_solver->solve(ftx);
    y.head(n_fem).noalias() -= F_a * alpha;
    y.tail(n_phi).noalias() -= F_phi * alpha;
  }

  MatX to_dense(bool extended = false) const {
    const int n = extended ? dim_extended() : dim();
    MatX S(n, n);
    VecX e = VecX::Zero(n), col;
    for (int k = 0; k < n; ++k) {
      e[k] = 1.0;
      if (extended)
        matvec_extended(e, col);
      else
        matvec(e, col);
      S.col(k) = col;
      e[k] = 0.0;
    }
    return S;
  }
};

inline CoupledSystem assemble_system(std::shared_ptr<const TetMesh> mesh,
                                     const BemOptions& opt = {}) {
  CoupledSystem sys;
  sys.mesh = mesh;
  sys.surf = std::make_shared<SurfaceMesh>(extract_boundary(*mesh));
  sys.options = opt;
  EdgeSpace es = make_edge_space(*mesh);
  sys.n_fem = es.n_dofs;
  sys.n_phi = sys.surf->n_vertices();
  sys.A = std::make_shared<SpMat>(assemble_curl_curl(es, *mesh));
  sys.R = trace_restriction(es, *sys.surf);
  sys.G = topological_gradient(*sys.surf);
  sys.C = curl_incidence(*sys.surf, mesh->nodes);
  sys.Mass = surface_vector_mass(*sys.surf, mesh->nodes);
  {
    SpMat L = SpMat(sys.G.transpose()) * sys.G;
    sys.surf_pin.assign(sys.n_phi, 0);
    std::vector<char> seen(sys.ncomp(), 0);
    for (int k = 0; k < sys.n_phi; ++k) {
      int c = sys.surf->vertex_component[k];
      if (!seen[c]) {
        seen[c] = 1;
        sys.surf_pin[k] = 1;
      }
    }
    for (int k = 0; k < L.outerSize(); ++k)
      for (SpMat::InnerIterator it(L, k); it; ++it)
        if (sys.surf_pin[it.row()] || sys.surf_pin[it.col()])
          it.valueRef() = (it.row() == it.col()) ? 1.0 : 0.0;
    auto ldlt = std::make_shared<Eigen::SimplicialLDLT<SpMat>>(L);
    if (ldlt->info() != Eigen::Success)
      throw AssemblyError("surface Laplacian factorization failed");
    sys.surf_laplacian = std::move(ldlt);
  }
  {
    SpMat M = sys.C * SpMat(sys.C.transpose());
    double scale = 0;
    for (int k = 0; k < M.outerSize(); ++k)
      for (SpMat::InnerIterator it(M, k); it; ++it)
        if (it.row() == it.col()) scale = std::max(scale, it.value());
    for (int k = 0; k < M.outerSize(); ++k)
      for (SpMat::InnerIterator it(M, k); it; ++it)
        if (it.row() == it.col()) it.valueRef() += 1e-13 * scale;
    auto ldlt = std::make_shared<Eigen::SimplicialLDLT<SpMat>>(M);
    if (ldlt->info() != Eigen::Success)
      throw AssemblyError("panel Gram factorization failed");
    sys.panel_gram = std::move(ldlt);
  }
  const int nc = sys.ncomp();
  sys.pairs.resize(nc * nc);
  for (int i = 0; i < nc; ++i)
    for (int j = i; j < nc; ++j) {
      FusedBlocks fb = assemble_fused_blocks(*sys.surf, mesh->nodes, i, j, opt);
      CoupledSystem::PairBlock pb;
      pb.P = std::make_shared<MatX>(std::move(fb.P));
      pb.BV = std::make_shared<MatX>(std::move(fb.BV));
      pb.BK_ij = std::make_shared<MatX>(std::move(fb.BKrc));
      if (i != j) pb.BK_ji = std::make_shared<MatX>(std::move(fb.BKcr));
      sys.pairs[sys.pair_index(i, j)] = std::move(pb);
    }
  return sys;
}

// Attaches cohomology sheets: extended saddle blocks F, H from the sheet
// contractions, with F_a = R^T (K - Id)^T eta and H[m,n] = -<V eta_n, eta_m>.
inline CoupledSystem augment_system(const CoupledSystem& base,
                                    const std::vector<CurrentSheet>& sheets) {
  CoupledSystem sys = base;
  sys.sheets = sheets;
  const int m = static_cast<int>(sheets.size());
  if (m == 0) return sys;
  sys.F_a = MatX::Zero(sys.n_fem, m);
  sys.F_phi = MatX::Zero(sys.n_phi, m);
  MatX Veta(sys.surf->n_edges(), m);
  for (int k = 0; k < m; ++k) {
    SheetContraction sc =
        contract_sheet(*sys.surf, sys.mesh->nodes, sheets[k].eta, sys.options);
    Veta.col(k) = sc.V_eta;
    VecX kmi = sc.KmiT_eta_pv - 0.5 * (sys.Mass.transpose() * sheets[k].eta);
    sys.F_a.col(k) = sys.R.transpose() * sys.project_out_gradients(kmi);
    sys.F_phi.col(k) = -(sys.G.transpose() * sc.V_eta);
  }
  MatX H(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) H(i, j) = -sheets[i].eta.dot(Veta.col(j));
  sys.H = 0.5 * (H + H.transpose());
  auto ldlt = std::make_shared<Eigen::LDLT<MatX>>(sys.H);
  if (ldlt->info() != Eigen::Success || !ldlt->isNegative())
    throw AssemblyError("singular sheet coupling (linearly dependent sheets?)");
  sys.H_solver = std::move(ldlt);
  return sys;
}

namespace detail {

inline bool tri_tri_overlap(const Vec3* a, const Vec3* b) {
  // conservative separating-axis test on the two planes and edge pairs
  auto separated_by = [&](const Vec3& axis) {
    if (axis.squaredNorm() < 1e-30) return false;
    double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
    for (int i = 0; i < 3; ++i) {
      amin = std::min(amin, axis.dot(a[i]));
      amax = std::max(amax, axis.dot(a[i]));
      bmin = std::min(bmin, axis.dot(b[i]));
      bmax = std::max(bmax, axis.dot(b[i]));
    }
    return amax < bmin || bmax < amin;
  };
  Vec3 na = (a[1] - a[0]).cross(a[2] - a[0]);
  Vec3 nb = (b[1] - b[0]).cross(b[2] - b[0]);
  if (separated_by(na) || separated_by(nb)) return false;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Vec3 axis = (a[(i + 1) % 3] - a[i]).cross(b[(j + 1) % 3] - b[j]);
      if (separated_by(axis)) return false;
    }
  return true;
}

}  // namespace detail

// Rigid (Q, t) update of one component: the moved geometry is rebuilt, but
// only the BEM blocks with exactly one side on the moved component are
// reassembled; all other blocks (including the whole FEM matrix and the
// moved component's own BEM diagonal) are shared with the input system.
inline CoupledSystem apply_motion(const CoupledSystem& base, const RigidMotion& motion) {
  motion.validate();
  const int k = motion.component;
  if (k < 0 || k >= base.ncomp()) throw MotionError("unknown component tag");

  auto moved = std::make_shared<TetMesh>(*base.mesh);
  for (int v = 0; v < moved->n_nodes(); ++v)
    if (moved->node_component[v] == k)
      moved->nodes[v] = motion.rotation * moved->nodes[v] + motion.translation;

  CoupledSystem sys = base;
  sys.mesh = moved;
  auto surf = std::make_shared<SurfaceMesh>(extract_boundary(*moved));
  if (surf->tris != base.surf->tris || surf->edges != base.surf->edges)
    throw MotionError("internal: motion changed the surface topology");
  sys.surf = surf;

  // contact check between the moved component and all others
  for (int c = 0; c < base.ncomp(); ++c) {
    if (c == k) continue;
    auto box = [&](int comp, Vec3& lo, Vec3& hi) {
      lo = Vec3::Constant(1e300);
      hi = Vec3::Constant(-1e300);
      for (int t = surf->tri_range[comp][0]; t < surf->tri_range[comp][1]; ++t)
        for (int v : surf->tris[t]) {
          lo = lo.cwiseMin(moved->nodes[v]);
          hi = hi.cwiseMax(moved->nodes[v]);
        }
    };
    Vec3 lo1, hi1, lo2, hi2;
    box(k, lo1, hi1);
    box(c, lo2, hi2);
    if ((lo1.array() > hi2.array()).any() || (lo2.array() > hi1.array()).any()) continue;
    for (int t1 = surf->tri_range[k][0]; t1 < surf->tri_range[k][1]; ++t1)
      for (int t2 = surf->tri_range[c][0]; t2 < surf->tri_range[c][1]; ++t2) {
        Vec3 a[3], b[3];
        for (int i = 0; i < 3; ++i) {
          a[i] = moved->nodes[surf->tris[t1][i]];
          b[i] = moved->nodes[surf->tris[t2][i]];
        }
        if (detail::tri_tri_overlap(a, b))
          throw MotionError("components intersect after the motion");
      }
  }

  // reassemble only the off-diagonal pairs touching component k
  for (int i = 0; i < sys.ncomp(); ++i)
    for (int j = i; j < sys.ncomp(); ++j) {
      const bool touches = (i == k) != (j == k);
      if (!touches) continue;
      FusedBlocks fb = assemble_fused_blocks(*surf, moved->nodes, i, j, sys.options);
      CoupledSystem::PairBlock pb;
      pb.P = std::make_shared<MatX>(std::move(fb.P));
      pb.BV = std::make_shared<MatX>(std::move(fb.BV));
      pb.BK_ij = std::make_shared<MatX>(std::move(fb.BKrc));
      if (i != j) pb.BK_ji = std::make_shared<MatX>(std::move(fb.BKcr));
      sys.pairs[sys.pair_index(i, j)] = std::move(pb);
    }

  // sheet couplings involve the single layer across components; refresh them
  if (!sys.sheets.empty()) sys = augment_system(sys, sys.sheets);
  return sys;
}

}  // namespace fembem
