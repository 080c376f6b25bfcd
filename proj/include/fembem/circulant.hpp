#pragma once

#include "fembem/bem.hpp"

namespace fembem {

// Rotational periodicity renders the cross-sector single layer block
// circulant: only the first-row blocks V_{1,i} are stored, the full product
// is formed from cyclic shifts.

// y_j = sum_k V_{1, 1 + (k - j mod n)} x_k  (1-based block indices as in the
// first-row convention: row j, column k uses block (k - j) mod n)
inline VecX circulant_matvec(const std::vector<MatX>& first_row, const VecX& x) {
  const int n = static_cast<int>(first_row.size());
  if (n == 0) throw AssemblyError("circulant product needs at least one block");
  const Eigen::Index rows = first_row[0].rows(), cols = first_row[0].cols();
  for (const auto& b : first_row)
    if (b.rows() != rows || b.cols() != cols)
      throw AssemblyError("circulant blocks must share one shape");
  if (x.size() != n * cols) throw AssemblyError("circulant operand size mismatch");
  VecX y = VecX::Zero(n * rows);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      const int blk = (k - j + n) % n;
      y.segment(j * rows, rows).noalias() += first_row[blk] * x.segment(k * cols, cols);
    }
  return y;
}

// periodic excitation: all solution blocks coincide, so the product collapses
// to the summed first-row block applied to the master segment
inline VecX periodic_reduce(const std::vector<MatX>& first_row, const VecX& x_master) {
  if (first_row.empty()) throw AssemblyError("periodic reduction needs at least one block");
  MatX sum = first_row[0];
  for (std::size_t i = 1; i < first_row.size(); ++i) sum += first_row[i];
  return sum * x_master;
}

inline MatX materialize_circulant(const std::vector<MatX>& first_row) {
  const int n = static_cast<int>(first_row.size());
  const Eigen::Index rows = first_row[0].rows(), cols = first_row[0].cols();
  MatX full = MatX::Zero(n * rows, n * cols);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      full.block(j * rows, k * cols, rows, cols) = first_row[(k - j + n) % n];
  return full;
}

// RT x RT single layer between two disjoint closed surfaces with their own
// coordinate sets (used for the rotated sector copies; the copies inherit the
// master's orientation tables, so the bases are the rotated master bases).
inline MatX assemble_cross_single_layer(const SurfaceMesh& s, const std::vector<Vec3>& Xtest,
                                        const std::vector<Vec3>& Xtrial,
                                        const BemOptions& opt = {}) {
  const auto ta = build_tri_data(s, Xtest);
  const auto tb = build_tri_data(s, Xtrial);
  MatX V = MatX::Zero(s.n_edges(), s.n_edges());
  parallel_for_chunks(ta.size(), [&](std::size_t lo, std::size_t hi) {
    PairWorkspace ws;
    double acc[3][3];
    for (std::size_t tx = lo; tx < hi; ++tx)
      for (std::size_t ty = 0; ty < tb.size(); ++ty) {
        const TriData& A = ta[tx];
        TriData B = tb[ty];
        // distinct geometries: force the separated classification
        for (int i = 0; i < 3; ++i) B.node[i] = -1 - B.node[i];
        pair_single_layer(A, B, false, opt, ws, acc);
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) V(A.edge[a], B.edge[b]) += acc[a][b];
      }
  });
  return V;
}

struct SectorBlocks {
  int n = 1;
  Vec3 axis = Vec3(0, 0, 1);
  std::vector<MatX> first_row;  // V_{1,i}, i = 1..n
};

// First-row single layer blocks of an n-fold rotationally periodic array of
// one closed master surface. Copy i lives at rotation angle 2 pi (i-1)/n.
inline SectorBlocks assemble_sector_single_layer(const SurfaceMesh& s,
                                                 const std::vector<Vec3>& X, const Vec3& axis,
                                                 int n, const BemOptions& opt = {}) {
  if (n < 1) throw AssemblyError("sector count must be >= 1");
  SectorBlocks out;
  out.n = n;
  out.axis = axis.normalized();
  out.first_row.reserve(n);
  out.first_row.push_back(assemble_single_layer(s, X, opt));
  for (int i = 1; i < n; ++i) {
    Mat3 Q = Eigen::AngleAxisd(2.0 * kPi * i / n, out.axis).toRotationMatrix();
    std::vector<Vec3> Xi(X.size());
    for (std::size_t v = 0; v < X.size(); ++v) Xi[v] = Q * X[v];
    out.first_row.push_back(assemble_cross_single_layer(s, X, Xi, opt));
  }
  return out;
}

// Direct assembly of the (i,j) sector block, for verifying the circulant
// structure numerically.
inline MatX assemble_sector_block(const SurfaceMesh& s, const std::vector<Vec3>& X,
                                  const Vec3& axis, int n, int i, int j,
                                  const BemOptions& opt = {}) {
  Vec3 ax = axis.normalized();
  Mat3 Qi = Eigen::AngleAxisd(2.0 * kPi * (i - 1) / n, ax).toRotationMatrix();
  Mat3 Qj = Eigen::AngleAxisd(2.0 * kPi * (j - 1) / n, ax).toRotationMatrix();
  std::vector<Vec3> Xi(X.size()), Xj(X.size());
  for (std::size_t v = 0; v < X.size(); ++v) {
    Xi[v] = Qi * X[v];
    Xj[v] = Qj * X[v];
  }
  if (i == j) return assemble_single_layer(s, Xi, opt);
  return assemble_cross_single_layer(s, Xi, Xj, opt);
}

}  // namespace fembem
