#pragma once

// Weighted graph Laplacians and a conjugate-gradient solver for the singular
// systems L x = b they produce.

#include <cmath>
#include <span>
#include <vector>

#include "idg/core.hpp"

namespace idg {

/// L_vv = sum of incident weights, L_vu = -w_vu. Off-diagonals are kept in CSR
/// form; `component` records the connected component of each vertex, which
/// spans the nullspace.
struct LaplacianSystem {
  std::size_t n = 0;
  std::vector<std::size_t> row_start;
  std::vector<Index> col;
  std::vector<double> off;  // stored as the positive weight; entry value is -off
  std::vector<double> diag;
  std::vector<Index> component;
  std::size_t component_count = 0;

  double entry(Index r, Index c) const {
    if (r == c) return diag[r];
    for (auto k = row_start[r]; k < row_start[r + 1]; ++k)
      if (col[k] == c) return -off[k];
    return 0.0;
  }

  void multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t r = 0; r < n; ++r) {
      double acc = diag[r] * x[r];
      for (auto k = row_start[r]; k < row_start[r + 1]; ++k) acc -= off[k] * x[col[k]];
      y[r] = acc;
    }
  }

  /// Removes the per-component mean, i.e. projects onto range(L).
  void project(std::span<double> v) const {
    std::vector<double> sum(component_count, 0.0);
    std::vector<std::size_t> cnt(component_count, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[component[i]] += v[i];
      ++cnt[component[i]];
    }
    for (std::size_t c = 0; c < component_count; ++c) sum[c] /= static_cast<double>(cnt[c]);
    for (std::size_t i = 0; i < n; ++i) v[i] -= sum[component[i]];
  }
};

inline LaplacianSystem assemble_laplacian(const Graph& g, std::span<const double> weights) {
  if (weights.size() != g.edge_count())
    throw ValidationError("assemble_laplacian: one weight per edge required");
  for (double w : weights)
    if (!(w > 0) || !std::isfinite(w))
      throw ValidationError("assemble_laplacian: weights must be positive and finite");

  LaplacianSystem L;
  L.n = g.vertex_count();
  L.row_start.assign(L.n + 1, 0);
  L.diag.assign(L.n, 0.0);
  for (Index v = 0; v < L.n; ++v) L.row_start[v + 1] = L.row_start[v] + g.degree(v);
  L.col.resize(L.row_start.back());
  L.off.resize(L.row_start.back());
  for (Index v = 0; v < L.n; ++v) {
    auto k = L.row_start[v];
    double d = 0;
    for (auto nb : g.neighbors(v)) {
      L.col[k] = nb.vertex;
      L.off[k] = weights[nb.edge];
      d += weights[nb.edge];
      ++k;
    }
    L.diag[v] = d;
  }
  L.component = connected_components(g, &L.component_count);
  return L;
}

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0;
  bool converged = false;
};

/// Pluggable backend for the Laplacian solves of the stress iteration.
class LaplacianSolver {
public:
  virtual ~LaplacianSolver() = default;
  virtual CgResult solve(const LaplacianSystem& L, std::span<const double> b,
                         std::span<const double> guess) const = 0;
};

/// Jacobi-preconditioned CG. The right-hand side and every iterate are kept
/// orthogonal to each component's constant vector; the returned solution has
/// zero mean per component. Stops when |L x - b~| <= tol |b~| for the projected
/// right-hand side b~, or after max_iter iterations.
inline CgResult solve_cg(const LaplacianSystem& L, std::span<const double> b, double tol,
                         int max_iter, std::span<const double> guess = {}) {
  const std::size_t n = L.n;
  if (b.size() != n) throw ValidationError("solve_cg: right-hand side has wrong size");
  for (double v : b)
    if (!std::isfinite(v)) throw NumericalError("solve_cg: non-finite right-hand side");

  std::vector<double> rhs(b.begin(), b.end());
  L.project(rhs);

  CgResult res;
  res.x.assign(n, 0.0);
  if (guess.size() == n) {
    for (std::size_t i = 0; i < n; ++i) res.x[i] = std::isfinite(guess[i]) ? guess[i] : 0.0;
    L.project(res.x);
  }

  auto dot = [n](const std::vector<double>& a, const std::vector<double>& c) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * c[i];
    return s;
  };

  const double bnorm = std::sqrt(dot(rhs, rhs));
  if (bnorm == 0.0) {
    std::fill(res.x.begin(), res.x.end(), 0.0);
    res.converged = true;
    return res;
  }

  std::vector<double> r(n), z(n), p(n), q(n);
  L.multiply(res.x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - q[i];

  auto precondition = [&](const std::vector<double>& in, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = L.diag[i] > 0 ? in[i] / L.diag[i] : 0.0;
    L.project(out);
  };

  double rnorm = std::sqrt(dot(r, r));
  if (rnorm <= tol * bnorm) {
    res.relative_residual = rnorm / bnorm;
    res.converged = true;
    return res;
  }

  precondition(r, z);
  p = z;
  double rz = dot(r, z);
  for (int it = 0; it < max_iter; ++it) {
    L.multiply(p, q);
    double pq = dot(p, q);
    if (!(pq > 0)) break;
    double step = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += step * p[i];
      r[i] -= step * q[i];
    }
    res.iterations = it + 1;
    rnorm = std::sqrt(dot(r, r));
    if (rnorm <= tol * bnorm) {
      res.converged = true;
      break;
    }
    precondition(r, z);
    double rz_next = dot(r, z);
    double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  L.project(res.x);

  // report the true residual, not the recursively updated one
  L.multiply(res.x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - q[i];
  res.relative_residual = std::sqrt(dot(r, r)) / bnorm;
  return res;
}

inline CgResult solve_cg(const LaplacianSystem& L, std::span<const double> b,
                         const SolverConfig& cfg, std::span<const double> guess = {}) {
  return solve_cg(L, b, cfg.cg_tol, cfg.cg_max_iter, guess);
}

class ConjugateGradientSolver final : public LaplacianSolver {
public:
  ConjugateGradientSolver(double tol, int max_iter) : tol_(tol), max_iter_(max_iter) {}
  explicit ConjugateGradientSolver(const SolverConfig& cfg)
      : ConjugateGradientSolver(cfg.cg_tol, cfg.cg_max_iter) {}

  CgResult solve(const LaplacianSystem& L, std::span<const double> b,
                 std::span<const double> guess) const override {
    return solve_cg(L, b, tol_, max_iter_, guess);
  }

private:
  double tol_;
  int max_iter_;
};

}  // namespace idg
