#pragma once

#include <array>
#include <map>
#include <numeric>
#include <optional>

#include "fembem/common.hpp"

namespace fembem {

struct Region {
  double mu_r = 1.0;
  Vec3 magnetization = Vec3::Zero();
  Vec3 current_density = Vec3::Zero();
};

// Volume discretization of the solid parts. Tetrahedra only; every tet is
// reordered to positive signed volume on construction. Edges carry a global
// orientation from low node index to high node index and all sign tables
// derive from it. Immutable after finalize(); safe to share across threads.
struct TetMesh {
  std::vector<Vec3> nodes;
  std::vector<std::array<int, 4>> tets;
  std::vector<int> region_tag;     // per tet
  std::vector<int> component_tag;  // per tet, connected-component id
  std::map<int, Region> regions;   // region tag -> material data
  int n_components = 0;

  // incidence (built by finalize)
  std::vector<std::array<int, 2>> edges;  // ascending pairs, lexicographic order
  std::vector<std::array<int, 6>> tet_edge;
  std::vector<std::array<std::int8_t, 6>> tet_edge_sign;
  std::vector<int> node_component;

  static constexpr std::array<std::array<int, 2>, 6> kLocalEdge = {
      {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
  // outward-oriented faces of a positively oriented tet
  static constexpr std::array<std::array<int, 3>, 4> kLocalFace = {
      {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}}};

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_tets() const { return static_cast<int>(tets.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }

  double tet_volume(int t) const {
    const auto& k = tets[t];
    return (nodes[k[1]] - nodes[k[0]])
               .cross(nodes[k[2]] - nodes[k[0]])
               .dot(nodes[k[3]] - nodes[k[0]]) /
           6.0;
  }

  Vec3 tet_centroid(int t) const {
    const auto& k = tets[t];
    return 0.25 * (nodes[k[0]] + nodes[k[1]] + nodes[k[2]] + nodes[k[3]]);
  }

  const Region& region(int t) const {
    auto it = regions.find(region_tag[t]);
    if (it == regions.end())
      throw MeshError("no material data for region tag " + std::to_string(region_tag[t]));
    return it->second;
  }

  int edge_index(int a, int b) const {
    std::array<int, 2> key{std::min(a, b), std::max(a, b)};
    auto it = std::lower_bound(edges.begin(), edges.end(), key);
    if (it == edges.end() || *it != key) return -1;
    return static_cast<int>(it - edges.begin());
  }

  double max_edge_length() const {
    double h = 0.0;
    for (const auto& e : edges) h = std::max(h, (nodes[e[1]] - nodes[e[0]]).norm());
    return h;
  }

  void finalize() {
    if (tets.size() != region_tag.size())
      throw MeshError("region tag list does not match tet count");
    // orient tets
    for (std::size_t t = 0; t < tets.size(); ++t) {
      double v = tet_volume(static_cast<int>(t));
      if (v < 0.0) {
        std::swap(tets[t][2], tets[t][3]);
        v = -v;
      }
      if (!(v > 0.0))
        throw MeshError("degenerate tetrahedron " + std::to_string(t) +
                        " (zero volume, not fixable by permutation)");
    }
    // faces shared by at most two tets
    {
      std::map<std::array<int, 3>, int> count;
      for (const auto& k : tets)
        for (const auto& f : kLocalFace) {
          std::array<int, 3> key{k[f[0]], k[f[1]], k[f[2]]};
          std::sort(key.begin(), key.end());
          if (++count[key] > 2) throw MeshError("non-manifold face (shared by >2 tets)");
        }
    }
    // edges: sorted unique ascending pairs
    std::vector<std::array<int, 2>> all;
    all.reserve(tets.size() * 6);
    for (const auto& k : tets)
      for (const auto& le : kLocalEdge) {
        int a = k[le[0]], b = k[le[1]];
        all.push_back({std::min(a, b), std::max(a, b)});
      }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    edges = std::move(all);
    tet_edge.resize(tets.size());
    tet_edge_sign.resize(tets.size());
    for (std::size_t t = 0; t < tets.size(); ++t) {
      for (int le = 0; le < 6; ++le) {
        int a = tets[t][kLocalEdge[le][0]];
        int b = tets[t][kLocalEdge[le][1]];
        int id = edge_index(a, b);
        tet_edge[t][le] = id;
        tet_edge_sign[t][le] = static_cast<std::int8_t>(a < b ? 1 : -1);
      }
    }
    build_components();
  }

 private:
  void build_components() {
    std::vector<int> parent(nodes.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& k : tets)
      for (int i = 1; i < 4; ++i) {
        int a = find(k[0]), b = find(k[i]);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    node_component.assign(nodes.size(), -1);
    component_tag.assign(tets.size(), -1);
    std::map<int, int> root_to_id;
    for (std::size_t t = 0; t < tets.size(); ++t) {
      int r = find(tets[t][0]);
      auto [it, inserted] = root_to_id.try_emplace(r, static_cast<int>(root_to_id.size()));
      component_tag[t] = it->second;
      for (int v : tets[t]) node_component[v] = it->second;
    }
    n_components = static_cast<int>(root_to_id.size());
  }
};

// Oriented boundary triangulation induced by a TetMesh. Triangle vertex order
// is counter-clockwise seen from outside; normals point from the solid into
// the air region. Triangles, edges and vertices are grouped by connected
// component so that per-component blocks are contiguous index ranges.
struct SurfaceMesh {
  const TetMesh* mesh = nullptr;

  std::vector<std::array<int, 3>> tris;  // parent node ids, outward CCW
  std::vector<int> tri_tet;
  std::vector<int> tri_component;
  std::vector<Vec3> tri_normal;  // unit outward
  std::vector<double> tri_area;

  std::vector<std::array<int, 2>> edges;  // ascending parent node pairs
  std::vector<std::array<int, 3>> tri_edge;  // local edges (0,1),(1,2),(2,0)
  std::vector<std::array<std::int8_t, 3>> tri_edge_sign;  // traversal vs ascending
  std::vector<std::array<int, 2>> edge_tri;               // two adjacent triangles
  std::vector<int> edge_component;
  std::vector<int> edge_volume_edge;  // surface edge -> volume edge id

  std::vector<int> vertices;        // parent node ids on the surface
  std::vector<int> node_vertex;     // parent node id -> surface vertex id (-1 off-surface)
  std::vector<int> vertex_component;

  int n_components = 0;
  std::vector<int> euler_char;  // V - E + F per surface component
  // contiguous [begin, end) index ranges per component
  std::vector<std::array<int, 2>> tri_range, edge_range, vertex_range;

  int n_tris() const { return static_cast<int>(tris.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }
  int n_vertices() const { return static_cast<int>(vertices.size()); }

  int edge_index(int a, int b) const {
    std::array<int, 2> key{std::min(a, b), std::max(a, b)};
    auto it = edge_lookup.find(key);
    return it == edge_lookup.end() ? -1 : it->second;
  }

  std::map<std::array<int, 2>, int> edge_lookup;
};

inline SurfaceMesh extract_boundary(const TetMesh& mesh) {
  SurfaceMesh s;
  s.mesh = &mesh;

  std::map<std::array<int, 3>, std::vector<std::pair<int, int>>> faces;  // key -> (tet, local face)
  for (int t = 0; t < mesh.n_tets(); ++t)
    for (int lf = 0; lf < 4; ++lf) {
      const auto& f = TetMesh::kLocalFace[lf];
      std::array<int, 3> key{mesh.tets[t][f[0]], mesh.tets[t][f[1]], mesh.tets[t][f[2]]};
      std::sort(key.begin(), key.end());
      faces[key].push_back({t, lf});
    }

  struct Bf {
    std::array<int, 3> tri;
    int tet, comp;
  };
  std::vector<Bf> bfs;
  for (const auto& [key, owners] : faces) {
    if (owners.size() > 2) throw MeshError("non-manifold face (shared by >2 tets)");
    if (owners.size() != 1) continue;
    auto [t, lf] = owners.front();
    const auto& f = TetMesh::kLocalFace[lf];
    bfs.push_back({{mesh.tets[t][f[0]], mesh.tets[t][f[1]], mesh.tets[t][f[2]]},
                   t,
                   mesh.component_tag[t]});
  }
  std::stable_sort(bfs.begin(), bfs.end(), [](const Bf& a, const Bf& b) {
    if (a.comp != b.comp) return a.comp < b.comp;
    return a.tri < b.tri;
  });

  for (const auto& bf : bfs) {
    s.tris.push_back(bf.tri);
    s.tri_tet.push_back(bf.tet);
    s.tri_component.push_back(bf.comp);
    Vec3 n = (mesh.nodes[bf.tri[1]] - mesh.nodes[bf.tri[0]])
                 .cross(mesh.nodes[bf.tri[2]] - mesh.nodes[bf.tri[0]]);
    const double twoA = n.norm();
    if (!(twoA > 0.0)) throw MeshError("degenerate boundary triangle");
    s.tri_area.push_back(0.5 * twoA);
    n /= twoA;
    // outward: away from the adjacent tet centroid
    Vec3 c = (mesh.nodes[bf.tri[0]] + mesh.nodes[bf.tri[1]] + mesh.nodes[bf.tri[2]]) / 3.0;
    if (n.dot(c - mesh.tet_centroid(bf.tet)) < 0.0)
      throw MeshError("boundary face with inward orientation");
    s.tri_normal.push_back(n);
  }

  // surface edges grouped by component, lexicographic inside a component
  {
    std::vector<std::array<int, 3>> keyed;  // (component, a, b)
    for (std::size_t t = 0; t < s.tris.size(); ++t)
      for (int le = 0; le < 3; ++le) {
        int a = s.tris[t][le], b = s.tris[t][(le + 1) % 3];
        keyed.push_back({s.tri_component[t], std::min(a, b), std::max(a, b)});
      }
    std::sort(keyed.begin(), keyed.end());
    keyed.erase(std::unique(keyed.begin(), keyed.end()), keyed.end());
    for (const auto& k : keyed) {
      s.edge_lookup[{k[1], k[2]}] = static_cast<int>(s.edges.size());
      s.edges.push_back({k[1], k[2]});
      s.edge_component.push_back(k[0]);
    }
  }

  s.tri_edge.resize(s.tris.size());
  s.tri_edge_sign.resize(s.tris.size());
  s.edge_tri.assign(s.edges.size(), {-1, -1});
  std::vector<int> edge_orient_sum(s.edges.size(), 0);
  for (std::size_t t = 0; t < s.tris.size(); ++t)
    for (int le = 0; le < 3; ++le) {
      int a = s.tris[t][le], b = s.tris[t][(le + 1) % 3];
      int id = s.edge_index(a, b);
      s.tri_edge[t][le] = id;
      s.tri_edge_sign[t][le] = static_cast<std::int8_t>(a < b ? 1 : -1);
      if (s.edge_tri[id][0] < 0)
        s.edge_tri[id][0] = static_cast<int>(t);
      else if (s.edge_tri[id][1] < 0)
        s.edge_tri[id][1] = static_cast<int>(t);
      else
        throw MeshError("surface edge with more than two adjacent triangles");
      edge_orient_sum[id] += s.tri_edge_sign[t][le];
    }
  for (std::size_t e = 0; e < s.edges.size(); ++e) {
    if (s.edge_tri[e][1] < 0) throw MeshError("open surface: edge with one adjacent triangle");
    if (edge_orient_sum[e] != 0)
      throw MeshError("inconsistent surface orientation across an edge");
  }

  // vertices grouped by component
  {
    std::vector<std::array<int, 2>> keyed;  // (component, node)
    for (std::size_t t = 0; t < s.tris.size(); ++t)
      for (int v : s.tris[t]) keyed.push_back({s.tri_component[t], v});
    std::sort(keyed.begin(), keyed.end());
    keyed.erase(std::unique(keyed.begin(), keyed.end()), keyed.end());
    s.node_vertex.assign(mesh.n_nodes(), -1);
    for (const auto& k : keyed) {
      if (s.node_vertex[k[1]] != -1) throw MeshError("surface vertex shared by two components");
      s.node_vertex[k[1]] = static_cast<int>(s.vertices.size());
      s.vertices.push_back(k[1]);
      s.vertex_component.push_back(k[0]);
    }
  }

  s.edge_volume_edge.resize(s.edges.size());
  for (std::size_t e = 0; e < s.edges.size(); ++e) {
    int id = mesh.edge_index(s.edges[e][0], s.edges[e][1]);
    if (id < 0) throw MeshError("surface edge with no matching volume edge");
    s.edge_volume_edge[e] = id;
  }

  // component ranges and Euler characteristics
  s.n_components = mesh.n_components;
  auto ranges = [](const std::vector<int>& comp, int n_comp) {
    std::vector<std::array<int, 2>> r(n_comp, {0, 0});
    for (int c = 0, i = 0; c < n_comp; ++c) {
      int lo = i;
      while (i < static_cast<int>(comp.size()) && comp[i] == c) ++i;
      r[c] = {lo, i};
    }
    return r;
  };
  s.tri_range = ranges(s.tri_component, s.n_components);
  s.edge_range = ranges(s.edge_component, s.n_components);
  s.vertex_range = ranges(s.vertex_component, s.n_components);
  s.euler_char.resize(s.n_components);
  for (int c = 0; c < s.n_components; ++c) {
    int V = s.vertex_range[c][1] - s.vertex_range[c][0];
    int E = s.edge_range[c][1] - s.edge_range[c][0];
    int F = s.tri_range[c][1] - s.tri_range[c][0];
    s.euler_char[c] = V - E + F;
  }
  return s;
}

}  // namespace fembem
