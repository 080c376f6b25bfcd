#pragma once

#include <cmath>
#include <mutex>

#include "fembem/common.hpp"

namespace fembem {

struct QuadPoint1D {
  double x, w;
};

// Gauss-Legendre nodes on [0,1], computed by Newton iteration on P_n.
inline std::vector<QuadPoint1D> gauss_legendre(int n) {
  std::vector<QuadPoint1D> q(n);
  for (int i = 0; i < n; ++i) {
    // initial guess on [-1,1]
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double p0 = 0, p1 = 0;
    for (int it = 0; it < 100; ++it) {
      p0 = 1.0;
      p1 = 0.0;
      for (int k = 0; k < n; ++k) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k + 1.0) * x * p1 - k * p2) / (k + 1.0);
      }
      double dp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    p1 = 0.0;
    p0 = 1.0;
    for (int k = 0; k < n; ++k) {
      double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k + 1.0) * x * p1 - k * p2) / (k + 1.0);
    }
    double dp = n * (x * p0 - p1) / (x * x - 1.0);
    q[i].x = 0.5 * (x + 1.0);
    q[i].w = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  std::sort(q.begin(), q.end(), [](auto a, auto b) { return a.x < b.x; });
  return q;
}

// Symmetric rules in barycentric coordinates; weights sum to 1, so
// ∫_T f ≈ |T| Σ w f(b).
struct TriQuadPoint {
  double b[3];
  double w;
};

inline const std::vector<TriQuadPoint>& tri_rule(int degree) {
  static const std::vector<TriQuadPoint> deg1 = {{{1. / 3, 1. / 3, 1. / 3}, 1.0}};
  static const std::vector<TriQuadPoint> deg2 = {
      {{2. / 3, 1. / 6, 1. / 6}, 1. / 3},
      {{1. / 6, 2. / 3, 1. / 6}, 1. / 3},
      {{1. / 6, 1. / 6, 2. / 3}, 1. / 3}};
  static const std::vector<TriQuadPoint> deg3 = {
      {{1. / 3, 1. / 3, 1. / 3}, -27. / 48},
      {{0.6, 0.2, 0.2}, 25. / 48},
      {{0.2, 0.6, 0.2}, 25. / 48},
      {{0.2, 0.2, 0.6}, 25. / 48}};
  static const std::vector<TriQuadPoint> deg5 = [] {
    const double a1 = 0.0597158717897698, b1 = 0.4701420641051151;
    const double a2 = 0.7974269853530873, b2 = 0.1012865073234563;
    const double w0 = 0.225, w1 = 0.1323941527885062, w2 = 0.1259391805448271;
    std::vector<TriQuadPoint> r = {{{1. / 3, 1. / 3, 1. / 3}, w0},
                                   {{a1, b1, b1}, w1}, {{b1, a1, b1}, w1}, {{b1, b1, a1}, w1},
                                   {{a2, b2, b2}, w2}, {{b2, a2, b2}, w2}, {{b2, b2, a2}, w2}};
    return r;
  }();
  if (degree <= 1) return deg1;
  if (degree == 2) return deg2;
  if (degree == 3) return deg3;
  return deg5;
}

struct TetQuadPoint {
  double b[4];
  double w;
};

inline const std::vector<TetQuadPoint>& tet_rule(int degree) {
  static const std::vector<TetQuadPoint> deg1 = {{{0.25, 0.25, 0.25, 0.25}, 1.0}};
  static const std::vector<TetQuadPoint> deg2 = [] {
    const double a = 0.5854101966249685, b = 0.1381966011250105;
    std::vector<TetQuadPoint> r = {{{a, b, b, b}, 0.25},
                                   {{b, a, b, b}, 0.25},
                                   {{b, b, a, b}, 0.25},
                                   {{b, b, b, a}, 0.25}};
    return r;
  }();
  if (degree <= 1) return deg1;
  return deg2;
}

// ---------------------------------------------------------------------------
// Galerkin quadrature for triangle pairs.
//
// Reference simplex T̂ = {0 <= x2 <= x1 <= 1} with chart
//   F(x̂) = A + x̂1 (B - A) + x̂2 (C - B),
// so barycentric coordinates w.r.t. (A,B,C) are (1-x̂1, x̂1-x̂2, x̂2) and
//   ∫_Tx ∫_Ty k = (2|Tx|)(2|Ty|) Σ w k(x(b), y(b)).
//
// Separated pairs use a tensorized Duffy rule; touching pairs use the
// Sauter-Schwab relative-coordinate transforms for identical, edge-adjacent
// and vertex-adjacent panels.
// ---------------------------------------------------------------------------

enum class PairKind { Separated = 0, SharedVertex = 1, SharedEdge = 2, Identical = 3 };

struct PairQuadPoint {
  double bx[3];
  double by[3];
  double w;
};

namespace detail {

inline void push_point(std::vector<PairQuadPoint>& out, double x1, double x2, double y1,
                       double y2, double w) {
  PairQuadPoint p;
  p.bx[0] = 1.0 - x1;
  p.bx[1] = x1 - x2;
  p.bx[2] = x2;
  p.by[0] = 1.0 - y1;
  p.by[1] = y1 - y2;
  p.by[2] = y2;
  p.w = w;
  out.push_back(p);
}

inline std::vector<PairQuadPoint> build_separated(int order) {
  const auto g = gauss_legendre(order);
  std::vector<PairQuadPoint> out;
  out.reserve(g.size() * g.size() * g.size() * g.size());
  for (const auto& u1 : g)
    for (const auto& v1 : g)
      for (const auto& u2 : g)
        for (const auto& v2 : g)
          push_point(out, u1.x, u1.x * v1.x, u2.x, u2.x * v2.x,
                     u1.w * v1.w * u2.w * v2.w * u1.x * u2.x);
  return out;
}

inline std::vector<PairQuadPoint> build_identical(int order) {
  const auto g = gauss_legendre(order);
  std::vector<PairQuadPoint> out;
  for (const auto& qe : g)
    for (const auto& q1 : g)
      for (const auto& q2 : g)
        for (const auto& q3 : g) {
          const double xi = qe.x, e1 = q1.x, e2 = q2.x, e3 = q3.x;
          const double w = qe.w * q1.w * q2.w * q3.w * xi * xi * xi * e1 * e1 * e2;
          push_point(out, xi, xi * (1 - e1 + e1 * e2), xi * (1 - e1 * e2 * e3), xi * (1 - e1), w);
          push_point(out, xi * (1 - e1 * e2 * e3), xi * (1 - e1), xi, xi * (1 - e1 + e1 * e2), w);
          push_point(out, xi, xi * e1 * (1 - e2 + e2 * e3), xi * (1 - e1 * e2), xi * e1 * (1 - e2),
                     w);
          push_point(out, xi * (1 - e1 * e2), xi * e1 * (1 - e2), xi, xi * e1 * (1 - e2 + e2 * e3),
                     w);
          push_point(out, xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3), xi, xi * e1 * (1 - e2),
                     w);
          push_point(out, xi, xi * e1 * (1 - e2), xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3),
                     w);
        }
  return out;
}

inline std::vector<PairQuadPoint> build_shared_edge(int order) {
  const auto g = gauss_legendre(order);
  std::vector<PairQuadPoint> out;
  for (const auto& qe : g)
    for (const auto& q1 : g)
      for (const auto& q2 : g)
        for (const auto& q3 : g) {
          const double xi = qe.x, e1 = q1.x, e2 = q2.x, e3 = q3.x;
          const double base = qe.w * q1.w * q2.w * q3.w * xi * xi * xi;
          push_point(out, xi, xi * e1 * e3, xi * (1 - e1 * e2), xi * e1 * (1 - e2),
                     base * e1 * e1);
          push_point(out, xi, xi * e1, xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3),
                     base * e1 * e1 * e2);
          push_point(out, xi * (1 - e1 * e2), xi * e1 * (1 - e2), xi, xi * e1 * e2 * e3,
                     base * e1 * e1 * e2);
          push_point(out, xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3), xi, xi * e1,
                     base * e1 * e1 * e2);
          push_point(out, xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3), xi, xi * e1 * e2,
                     base * e1 * e1 * e2);
        }
  return out;
}

inline std::vector<PairQuadPoint> build_shared_vertex(int order) {
  const auto g = gauss_legendre(order);
  std::vector<PairQuadPoint> out;
  for (const auto& qe : g)
    for (const auto& q1 : g)
      for (const auto& q2 : g)
        for (const auto& q3 : g) {
          const double xi = qe.x, e1 = q1.x, e2 = q2.x, e3 = q3.x;
          const double w = qe.w * q1.w * q2.w * q3.w * xi * xi * xi * e2;
          push_point(out, xi, xi * e1, xi * e2, xi * e2 * e3, w);
          push_point(out, xi * e2, xi * e2 * e3, xi, xi * e1, w);
        }
  return out;
}

}  // namespace detail

inline const std::vector<PairQuadPoint>& pair_rule(PairKind kind, int order) {
  static std::mutex mtx;
  static std::map<std::pair<int, int>, std::vector<PairQuadPoint>> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto key = std::make_pair(static_cast<int>(kind), order);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<PairQuadPoint> rule;
  switch (kind) {
    case PairKind::Separated: rule = detail::build_separated(order); break;
    case PairKind::SharedVertex: rule = detail::build_shared_vertex(order); break;
    case PairKind::SharedEdge: rule = detail::build_shared_edge(order); break;
    case PairKind::Identical: rule = detail::build_identical(order); break;
  }
  return cache.emplace(key, std::move(rule)).first->second;
}

}  // namespace fembem
