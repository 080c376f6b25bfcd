#pragma once

#include <chrono>
#include <functional>

#include "fembem/coupling.hpp"

namespace fembem {

struct SolverConfig {
  double tolerance = 1e-8;  // relative preconditioned residual
  int max_iterations = 5000;
  VecX initial_guess;  // empty = zero start
  // preconditioner knobs
  double diagonal_shift = 0.01;     // relative shift on the curl-curl diagonal
  bool gradient_correction = true;  // nodal-space smoother for the kernel modes
  std::string bem_preconditioner = "dense";  // "dense" | "diagonal"

  void validate() const {
    if (!(tolerance > 0.0 && tolerance < 1.0))
      throw ConfigError("solver tolerance must lie in (0, 1)");
    if (max_iterations < 1) throw ConfigError("max_iterations must be positive");
  }
};

struct SolveReport {
  int iterations = 0;
  bool converged = false;
  int breakdown_at = -1;  // iteration of a NaN/indefiniteness breakdown, -1 if none
  std::vector<double> residual_history;  // preconditioned, relative to |b|
  std::map<std::string, double> seconds;
};

struct MinresResult {
  VecX x;
  SolveReport report;
};

struct LinearOperator {
  Eigen::Index n = 0;
  std::function<void(const VecX&, VecX&)> apply;
};

// Preconditioned MINRES (Paige-Saunders). The preconditioner must be
// symmetric positive definite; the operator symmetric (definiteness not
// required). For consistent singular systems the residual still contracts;
// the solution is then one representative of the affine solution set.
inline MinresResult minres(const LinearOperator& op, const LinearOperator& precond,
                           const VecX& b, const SolverConfig& cfg) {
  cfg.validate();
  MinresResult res;
  SolveReport& rep = res.report;
  const auto t0 = std::chrono::steady_clock::now();

  VecX x = cfg.initial_guess.size() ? cfg.initial_guess : VecX::Zero(op.n);
  if (x.size() != op.n) throw ConfigError("initial guess has the wrong dimension");

  VecX tmp(op.n);
  VecX r1(op.n);
  op.apply(x, tmp);
  r1 = b - tmp;
  VecX y(op.n);
  precond.apply(r1, y);
  double beta1sq = r1.dot(y);
  if (beta1sq < 0) throw AssemblyError("preconditioner is not positive definite");

  double normb;
  {
    VecX yb(op.n);
    precond.apply(b, yb);
    normb = std::sqrt(std::max(0.0, b.dot(yb)));
  }
  if (normb == 0.0) {
    res.x = VecX::Zero(op.n);
    rep.converged = true;
    rep.residual_history.push_back(0.0);
    return res;
  }

  double beta1 = std::sqrt(beta1sq);
  double phibar = beta1;
  rep.residual_history.push_back(phibar / normb);
  if (phibar / normb <= cfg.tolerance) {
    res.x = x;
    rep.converged = true;
    return res;
  }

  double oldb = 0, beta = beta1, dbar = 0, epsln = 0, cs = -1, sn = 0;
  double oldeps = 0;
  VecX r2 = r1, v(op.n), w = VecX::Zero(op.n), w1 = VecX::Zero(op.n), w2 = VecX::Zero(op.n);

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    v = y / beta;
    op.apply(v, y);
    if (it >= 2) y -= (beta / oldb) * r1;
    const double alfa = v.dot(y);
    y -= (alfa / beta) * r2;
    r1 = r2;
    r2 = y;
    precond.apply(r2, y);
    oldb = beta;
    const double betasq = r2.dot(y);
    if (!std::isfinite(betasq) || betasq < 0) {
      rep.breakdown_at = it;
      rep.iterations = it;
      break;
    }
    beta = std::sqrt(betasq);

    oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gamma = std::hypot(gbar, beta);
    gamma = std::max(gamma, 1e-300);
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    w1 = w2;
    w2 = w;
    w = (v - oldeps * w1 - delta * w2) / gamma;
    x += phi * w;

    rep.iterations = it;
    rep.residual_history.push_back(phibar / normb);
    if (!std::isfinite(phibar)) {
      rep.breakdown_at = it;
      break;
    }
    if (phibar / normb <= cfg.tolerance) {
      rep.converged = true;
      break;
    }
  }
  res.x = std::move(x);
  rep.seconds["solve"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// Block-diagonal SPD preconditioner:
//  * FEM block: one symmetric Gauss-Seidel sweep on A + R^T diag(W) R with a
//    relative diagonal shift (the curl-curl kernel needs the anchor), plus an
//    additive nodal-Laplacian correction for the gradient modes;
//  * BEM block: per-component inverse of G^T V G (dense Cholesky with a
//    rank-one anchor on the constant kernel; the per-component split keeps it
//    valid across rigid motion). A plain inverse-diagonal variant is kept as
//    a config choice, but its iteration growth under refinement breaches the
//    2x-per-level budget;
//  * sheet block: dense solve with -H (SPD).
// The object is built once per topology; apply() is pure.
class BlockDiagPreconditioner {
 public:
  BlockDiagPreconditioner(const CoupledSystem& sys, const SolverConfig& cfg) {
    n_fem_ = sys.n_fem;
    n_phi_ = sys.n_phi;
    n_alpha_ = sys.n_sheets();
    gradient_correction_ = cfg.gradient_correction;

    SpMat Ahat = *sys.A;
    // diagonal of the boundary part R^T (C^T P C) R, assembled per entry
    {
      SpMat CR = sys.C * sys.R;  // tris x fem edges, column e = edge weights
      std::vector<Eigen::Triplet<double>> trip;
      const auto& surf = *sys.surf;
      for (int e = 0; e < n_fem_; ++e) {
        double val = 0;
        for (SpMat::InnerIterator it1(CR, e); it1; ++it1)
          for (SpMat::InnerIterator it2(CR, e); it2; ++it2) {
            int c = surf.tri_component[it1.row()];
            if (surf.tri_component[it2.row()] != c) continue;
            const MatX& P = *sys.pairs[sys.pair_index(c, c)].P;
            const int off = surf.tri_range[c][0];
            val += it1.value() * it2.value() * P(it1.row() - off, it2.row() - off);
          }
        if (val != 0.0) trip.emplace_back(e, e, val);
      }
      SpMat Wdiag(n_fem_, n_fem_);
      Wdiag.setFromTriplets(trip.begin(), trip.end());
      Ahat += Wdiag;
    }
    for (int k = 0; k < Ahat.outerSize(); ++k)
      for (SpMat::InnerIterator it(Ahat, k); it; ++it)
        if (it.row() == it.col()) it.valueRef() *= (1.0 + cfg.diagonal_shift);
    Ahat.makeCompressed();
    fem_lower_ = Ahat.triangularView<Eigen::Lower>();
    fem_upper_ = SpMat(fem_lower_.transpose());
    fem_diag_ = Ahat.diagonal();
    for (int i = 0; i < fem_diag_.size(); ++i)
      if (!(fem_diag_[i] > 0)) throw AssemblyError("non-SPD FEM preconditioner diagonal");

    if (gradient_correction_) {
      Gv_ = gradient_incidence(*sys.mesh);
      SpMat L = SpMat(Gv_.transpose()) * Ahat * Gv_;
      L.makeCompressed();
      nodal_lower_ = L.triangularView<Eigen::Lower>();
      nodal_upper_ = SpMat(nodal_lower_.transpose());
      nodal_diag_ = L.diagonal();
      for (int i = 0; i < nodal_diag_.size(); ++i)
        if (!(nodal_diag_[i] > 0)) nodal_diag_[i] = 1.0;
    }

    // BEM block: per-component approximation of (G^T V G)^-1
    phi_dense_ = (cfg.bem_preconditioner != "diagonal");
    phi_diag_inv_.resize(n_phi_);
    phi_llt_.resize(sys.ncomp());
    bool fallback = false;
    for (int c = 0; c < sys.ncomp(); ++c) {
      const MatX& BV = *sys.pairs[sys.pair_index(c, c)].BV;
      const auto vr = sys.surf->vertex_range[c];
      if (phi_dense_) {
        MatX M = BV;
        const double scale = M.diagonal().mean();
        // anchor the constant kernel and guard the Cholesky
        M += (scale / M.rows()) * MatX::Ones(M.rows(), M.cols());
        M.diagonal().array() += 1e-12 * scale;
        phi_llt_[c] = std::make_shared<Eigen::LLT<MatX>>(M);
        if (phi_llt_[c]->info() != Eigen::Success) {
          phi_dense_ = false;  // negative pivot: fall back to the diagonal
          fallback = true;
        }
      }
      for (int k = vr[0]; k < vr[1]; ++k) {
        double d = BV(k - vr[0], k - vr[0]);
        if (!(d > 0)) fallback = true;
        phi_diag_inv_[k] = d;
      }
    }
    if (fallback)  // absolute-value floor, keeps the operator SPD
      for (int k = 0; k < n_phi_; ++k)
        phi_diag_inv_[k] = std::max(std::abs(phi_diag_inv_[k]), 1e-300);
    phi_diag_inv_ = phi_diag_inv_.cwiseInverse();
    vertex_range_ = sys.surf->vertex_range;

    if (n_alpha_ > 0) {
      negH_ = std::make_shared<Eigen::LLT<MatX>>(MatX(-sys.H));
      if (negH_->info() != Eigen::Success)
        throw AssemblyError("sheet preconditioner block is not SPD");
    }
  }

  Eigen::Index dim() const { return n_fem_ + n_phi_ + n_alpha_; }

  void apply(const VecX& r, VecX& z) const {
    z.resize(r.size());
    // FEM block: symmetric Gauss-Seidel, M^-1 = (D+U)^-1 D (D+L)^-1
    VecX rf = r.head(n_fem_);
    VecX t = fem_lower_.triangularView<Eigen::Lower>().solve(rf);
    t.array() *= fem_diag_.array();
    VecX zf = fem_upper_.triangularView<Eigen::Upper>().solve(t);
    if (gradient_correction_) {
      VecX rn = Gv_.transpose() * rf;
      VecX tn = nodal_lower_.triangularView<Eigen::Lower>().solve(rn);
      tn.array() *= nodal_diag_.array();
      VecX zn = nodal_upper_.triangularView<Eigen::Upper>().solve(tn);
      zf += Gv_ * zn;
    }
    z.head(n_fem_) = zf;
    if (phi_dense_) {
      for (std::size_t c = 0; c < phi_llt_.size(); ++c) {
        const auto vr = vertex_range_[c];
        z.segment(n_fem_ + vr[0], vr[1] - vr[0]) =
            phi_llt_[c]->solve(r.segment(n_fem_ + vr[0], vr[1] - vr[0]));
      }
    } else {
      z.segment(n_fem_, n_phi_) = phi_diag_inv_.cwiseProduct(r.segment(n_fem_, n_phi_));
    }
    if (n_alpha_ > 0) z.tail(n_alpha_) = negH_->solve(r.tail(n_alpha_));
  }

  LinearOperator as_operator(bool extended) const {
    LinearOperator P;
    P.n = extended ? dim() : n_fem_ + n_phi_;
    P.apply = [this, extended](const VecX& v, VecX& out) {
      if (extended || n_alpha_ == 0) {
        apply(v, out);
      } else {
        VecX vin(dim());
        vin.head(n_fem_ + n_phi_) = v;
        vin.tail(n_alpha_).setZero();
        VecX full;
        apply(vin, full);
        out = full.head(n_fem_ + n_phi_);
      }
    };
    return P;
  }

 private:
  Eigen::Index n_fem_ = 0, n_phi_ = 0, n_alpha_ = 0;
  SpMat fem_lower_, fem_upper_;
  VecX fem_diag_;
  bool gradient_correction_ = true;
  SpMat Gv_, nodal_lower_, nodal_upper_;
  VecX nodal_diag_;
  VecX phi_diag_inv_;
  bool phi_dense_ = true;
  std::vector<std::shared_ptr<Eigen::LLT<MatX>>> phi_llt_;
  std::vector<std::array<int, 2>> vertex_range_;
  std::shared_ptr<Eigen::LLT<MatX>> negH_;
};

inline std::shared_ptr<const BlockDiagPreconditioner> build_preconditioner(
    const CoupledSystem& sys, const SolverConfig& cfg = {}) {
  return std::make_shared<BlockDiagPreconditioner>(sys, cfg);
}

// Convenience: solve the coupled (possibly extended) system.
struct SystemSolution {
  VecX a, phi, alpha;
  SolveReport report;
};

inline SystemSolution solve_system(const CoupledSystem& sys,
                                   const std::shared_ptr<const BlockDiagPreconditioner>& P,
                                   const VecX& f, const SolverConfig& cfg) {
  const bool extended = sys.n_sheets() > 0;
  const Eigen::Index n = extended ? sys.dim_extended() : sys.dim();
  LinearOperator op;
  op.n = n;
  if (extended)
    op.apply = [&sys](const VecX& x, VecX& y) { sys.matvec_extended(x, y); };
  else
    op.apply = [&sys](const VecX& x, VecX& y) { sys.matvec(x, y); };
  VecX b = VecX::Zero(n);
  b.head(sys.n_fem) = f;
  MinresResult r = minres(op, P->as_operator(extended), b, cfg);
  SystemSolution sol;
  sol.a = r.x.head(sys.n_fem);
  sol.phi = r.x.segment(sys.n_fem, sys.n_phi);
  if (extended) sol.alpha = r.x.tail(sys.n_sheets());
  sol.report = std::move(r.report);
  return sol;
}

}  // namespace fembem
