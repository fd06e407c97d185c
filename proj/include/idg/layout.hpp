#pragma once

// Initial embeddings: uniform random cube, breadth-first placement on spheres
// around already placed neighbors, and PivotMDS.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <span>
#include <vector>

#include "idg/core.hpp"
#include "idg/random.hpp"

namespace idg {

inline Embedding layout_random_cube(std::size_t n, double side, std::uint64_t seed) {
  if (!(side > 0)) throw ValidationError("layout_random_cube: side must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.0, side);
  Embedding x(n);
  for (auto& p : x) {
    p.x = coord(rng);
    p.y = coord(rng);
    p.z = coord(rng);
  }
  return x;
}

/// Breadth-first placement: each component starts at its highest-degree
/// vertex (lowest id on ties) at the origin; every newly discovered vertex w
/// is put at distance d_vw from its discoverer v in a random direction.
inline Embedding layout_hypersphere(const Graph& g, std::span<const double> d,
                                    std::uint64_t seed) {
  if (d.size() != g.edge_count()) throw ValidationError("layout_hypersphere: one distance per edge");
  const std::size_t n = g.vertex_count();
  std::mt19937_64 rng(seed);
  Embedding x(n);
  std::size_t ncomp = 0;
  auto comp = connected_components(g, &ncomp);

  std::vector<Index> start(ncomp, std::numeric_limits<Index>::max());
  for (Index v = 0; v < n; ++v) {
    auto& s = start[comp[v]];
    if (s == std::numeric_limits<Index>::max() || g.degree(v) > g.degree(s)) s = v;
  }

  std::vector<char> placed(n, 0);
  std::queue<Index> queue;
  for (Index s : start) {
    placed[s] = 1;
    queue.push(s);
    while (!queue.empty()) {
      Index v = queue.front();
      queue.pop();
      for (auto nb : g.neighbors(v)) {
        if (placed[nb.vertex]) continue;
        placed[nb.vertex] = 1;
        x[nb.vertex] = x[v] + d[nb.edge] * unit_direction(rng());
        queue.push(nb.vertex);
      }
    }
  }
  return x;
}

/// Single-source shortest paths with edge lengths d.
inline std::vector<double> shortest_paths(const Graph& g, std::span<const double> d, Index src) {
  std::vector<double> dist(g.vertex_count(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, Index>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[src] = 0;
  heap.push({0.0, src});
  while (!heap.empty()) {
    auto [dv, v] = heap.top();
    heap.pop();
    if (dv > dist[v]) continue;
    for (auto nb : g.neighbors(v)) {
      double cand = dv + d[nb.edge];
      if (cand < dist[nb.vertex]) {
        dist[nb.vertex] = cand;
        heap.push({cand, nb.vertex});
      }
    }
  }
  return dist;
}

/// Classical MDS of a double-centered n x k squared-distance matrix sampled at
/// k pivots. The first pivot is drawn from the seed; each further pivot is the
/// vertex farthest from all pivots chosen so far.
inline Embedding layout_pivot_mds(const Graph& g, std::span<const double> d, std::size_t pivots,
                                  std::uint64_t seed) {
  const std::size_t n = g.vertex_count();
  if (d.size() != g.edge_count()) throw ValidationError("layout_pivot_mds: one distance per edge");
  if (pivots < 3) throw ValidationError("layout_pivot_mds: need at least 3 pivots");
  if (pivots > n) throw ValidationError("layout_pivot_mds: more pivots than vertices");

  std::mt19937_64 rng(seed);
  Eigen::MatrixXd dist(n, pivots);
  std::vector<double> mindist(n, std::numeric_limits<double>::infinity());
  Index pivot = static_cast<Index>(rng() % n);
  for (std::size_t j = 0; j < pivots; ++j) {
    auto col = shortest_paths(g, d, pivot);
    for (Index v = 0; v < n; ++v) {
      dist(v, j) = col[v];
      mindist[v] = std::min(mindist[v], col[v]);
    }
    Index next = 0;
    for (Index v = 1; v < n; ++v)
      if (mindist[v] > mindist[next]) next = v;
    pivot = next;
  }

  // unreachable pairs (disconnected input) get the largest finite distance
  double far = 0;
  for (Eigen::Index i = 0; i < dist.size(); ++i)
    if (std::isfinite(dist.data()[i])) far = std::max(far, dist.data()[i]);
  for (Eigen::Index i = 0; i < dist.size(); ++i)
    if (!std::isfinite(dist.data()[i])) dist.data()[i] = far;

  Eigen::MatrixXd c = dist.array().square().matrix();
  Eigen::VectorXd row_mean = c.rowwise().mean();
  Eigen::RowVectorXd col_mean = c.colwise().mean();
  double total = c.mean();
  c = -0.5 * ((c.colwise() - row_mean).rowwise() - col_mean).array() - 0.5 * total;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.transpose() * c);
  const auto& evals = eig.eigenvalues();  // ascending
  const auto& evecs = eig.eigenvectors();
  const double scale = std::sqrt(static_cast<double>(n) / static_cast<double>(pivots));
  const double top = std::sqrt(std::max(evals(pivots - 1), 0.0));

  Embedding x(n);
  for (int axis = 0; axis < 3 && axis < static_cast<int>(pivots); ++axis) {
    auto idx = static_cast<Eigen::Index>(pivots) - 1 - axis;
    double sigma = std::sqrt(std::max(evals(idx), 0.0));
    if (sigma <= 1e-12 * top || sigma == 0) continue;
    // column of U * sigma, rescaled so that k = n reproduces classical MDS
    Eigen::VectorXd coord = c * evecs.col(idx) * std::sqrt(scale / sigma);
    for (Index v = 0; v < n; ++v) x[v][axis] = coord(v);
  }

  Vec3 mean;
  for (const auto& p : x) mean += p;
  mean /= static_cast<double>(n);
  for (auto& p : x) p -= mean;
  return x;
}

}  // namespace idg
