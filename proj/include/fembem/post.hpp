#pragma once

#include <fstream>

#include "fembem/coupling.hpp"

namespace fembem {

struct FieldSample {
  Vec3 location;
  Vec3 B;
  bool interior = false;
};

// B = curl A_h, constant per tet for the lowest-order space.
inline std::vector<Vec3> interior_B(const VecX& a, const TetMesh& mesh) {
  std::vector<Vec3> B(mesh.n_tets(), Vec3::Zero());
  std::array<Vec3, 4> g;
  double vol;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    tet_grads(mesh, t, g, vol);
    Vec3 b = Vec3::Zero();
    for (int le = 0; le < 6; ++le) b += a[mesh.tet_edge[t][le]] * whitney_curl(mesh, t, le, g);
    B[t] = b;
  }
  return B;
}

inline Vec3 volume_average_B(const std::vector<Vec3>& B, const TetMesh& mesh) {
  Vec3 acc = Vec3::Zero();
  double vol = 0;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const double v = mesh.tet_volume(t);
    acc += v * B[t];
    vol += v;
  }
  return acc / vol;
}

inline double l2_norm_B(const std::vector<Vec3>& B, const TetMesh& mesh) {
  double acc = 0;
  for (int t = 0; t < mesh.n_tets(); ++t) acc += mesh.tet_volume(t) * B[t].squaredNorm();
  return std::sqrt(acc);
}

// || B_h - B_exact ||_L2 with a degree-2 rule per tet (B_h is constant).
inline double l2_error_B(const std::vector<Vec3>& B, const TetMesh& mesh,
                         const std::function<Vec3(const Vec3&)>& exact) {
  const auto& rule = tet_rule(2);
  double acc = 0;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const auto& k = mesh.tets[t];
    const double vol = mesh.tet_volume(t);
    for (const auto& q : rule) {
      Vec3 x = q.b[0] * mesh.nodes[k[0]] + q.b[1] * mesh.nodes[k[1]] +
               q.b[2] * mesh.nodes[k[2]] + q.b[3] * mesh.nodes[k[3]];
      acc += vol * q.w * (B[t] - exact(x)).squaredNorm();
    }
  }
  return std::sqrt(acc);
}

// Discrete div B check: the flux of the per-tet constant field through the
// tet boundary, which vanishes to rounding because B is an exact curl.
inline double max_tet_flux_imbalance(const std::vector<Vec3>& B, const TetMesh& mesh) {
  double worst = 0;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    double flux = 0, area = 0;
    for (const auto& f : TetMesh::kLocalFace) {
      Vec3 p0 = mesh.nodes[mesh.tets[t][f[0]]];
      Vec3 p1 = mesh.nodes[mesh.tets[t][f[1]]];
      Vec3 p2 = mesh.nodes[mesh.tets[t][f[2]]];
      Vec3 n2 = 0.5 * (p1 - p0).cross(p2 - p0);  // outward, area-weighted
      flux += n2.dot(B[t]);
      area += n2.norm();
    }
    double scale = std::max(1e-300, B[t].norm() * area);
    worst = std::max(worst, std::abs(flux) / scale);
  }
  return worst;
}

// Trapezoid rule over the closed polyline with the values already sampled.
// Terms are accumulated in magnitude order so that reversing the orientation
// negates the result exactly.
inline double closed_trapezoid(const std::vector<Vec3>& values,
                               const std::vector<Vec3>& polyline) {
  const std::size_t n = polyline.size();
  if (n < 2) throw ConfigError("loop needs at least two points");
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    terms[i] = 0.5 * (values[i] + values[j]).dot(polyline[j] - polyline[i]);
  }
  std::sort(terms.begin(), terms.end(), [](double x, double y) {
    return std::abs(x) < std::abs(y) || (std::abs(x) == std::abs(y) && x < y);
  });
  double acc = 0;
  for (double v : terms) acc += v;
  return acc;
}

inline double line_integral(const std::function<Vec3(const Vec3&)>& field,
                            const std::vector<Vec3>& polyline) {
  std::vector<Vec3> values(polyline.size());
  for (std::size_t i = 0; i < polyline.size(); ++i) values[i] = field(polyline[i]);
  return closed_trapezoid(values, polyline);
}

// Ampère loop: ∮ H+ · dl with H+ = B+/mu0 evaluated through the exterior
// representation formula. The loop must keep the mandated standoff distance;
// at least 64 samples.
inline double ampere_loop(const SurfaceMesh& surf, const std::vector<Vec3>& X,
                          const VecX& dirichlet_trace, const VecX& neumann_rt,
                          const std::vector<Vec3>& loop) {
  if (loop.size() < 64) throw ConfigError("Ampere loop needs at least 64 samples");
  auto B = evaluate_exterior_B(surf, X, dirichlet_trace, neumann_rt, loop);
  return closed_trapezoid(B, loop) / kMu0;
}

inline std::vector<Vec3> circle_loop(const Vec3& center, const Vec3& axis, double radius,
                                     int samples = 256) {
  Vec3 n = axis.normalized();
  Vec3 u = n.cross(Vec3(1, 0, 0));
  if (u.norm() < 0.1) u = n.cross(Vec3(0, 1, 0));
  u.normalize();
  Vec3 v = n.cross(u);
  std::vector<Vec3> pts(samples);
  for (int i = 0; i < samples; ++i) {
    double phi = 2.0 * kPi * i / samples;
    pts[i] = center + radius * (std::cos(phi) * u + std::sin(phi) * v);
  }
  return pts;
}

// VTK legacy ASCII export: volume mesh with per-cell B vectors.
inline void export_vtk(const TetMesh& mesh, const std::vector<Vec3>& B,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  char buf[160];
  out << "# vtk DataFile Version 3.0\nmagnetostatic solution\nASCII\n"
      << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.n_nodes() << " double\n";
  for (const auto& p : mesh.nodes) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p[0], p[1], p[2]);
    out << buf;
  }
  out << "CELLS " << mesh.n_tets() << " " << mesh.n_tets() * 5 << "\n";
  for (const auto& t : mesh.tets)
    out << "4 " << t[0] << " " << t[1] << " " << t[2] << " " << t[3] << "\n";
  out << "CELL_TYPES " << mesh.n_tets() << "\n";
  for (int t = 0; t < mesh.n_tets(); ++t) out << "10\n";
  if (!B.empty()) {
    if (static_cast<int>(B.size()) != mesh.n_tets())
      throw IoError("cell field size does not match the mesh");
    out << "CELL_DATA " << mesh.n_tets() << "\nVECTORS B double\n";
    for (const auto& b : B) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", b[0], b[1], b[2]);
      out << buf;
    }
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

// Surface export with the scalar potential on the vertices.
inline void export_vtk_surface(const SurfaceMesh& surf, const std::vector<Vec3>& X,
                               const VecX& phi, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  char buf[160];
  out << "# vtk DataFile Version 3.0\nboundary potential\nASCII\n"
      << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << surf.n_vertices() << " double\n";
  for (int v : surf.vertices) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", X[v][0], X[v][1], X[v][2]);
    out << buf;
  }
  out << "CELLS " << surf.n_tris() << " " << surf.n_tris() * 4 << "\n";
  for (const auto& t : surf.tris)
    out << "3 " << surf.node_vertex[t[0]] << " " << surf.node_vertex[t[1]] << " "
        << surf.node_vertex[t[2]] << "\n";
  out << "CELL_TYPES " << surf.n_tris() << "\n";
  for (int t = 0; t < surf.n_tris(); ++t) out << "5\n";
  if (phi.size()) {
    if (phi.size() != surf.n_vertices()) throw IoError("point field size mismatch");
    out << "POINT_DATA " << surf.n_vertices() << "\nSCALARS phi double 1\nLOOKUP_TABLE default\n";
    for (int k = 0; k < phi.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g\n", phi[k]);
      out << buf;
    }
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace fembem
