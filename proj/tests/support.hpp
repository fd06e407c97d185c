#pragma once

#include <random>
#include <vector>

#include "idg/idg.hpp"

namespace idg::testing {

inline Embedding random_points(std::size_t n, double side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, side);
  Embedding x(n);
  for (auto& p : x) p = {u(rng), u(rng), u(rng)};
  return x;
}

/// Random connected graph: a random spanning tree plus extra edges.
inline std::vector<std::pair<Index, Index>> random_connected_pairs(std::size_t n, std::size_t extra,
                                                                   std::mt19937_64& rng) {
  std::vector<std::pair<Index, Index>> pairs;
  for (Index v = 1; v < n; ++v) pairs.emplace_back(static_cast<Index>(rng() % v), v);
  for (std::size_t k = 0; k < extra; ++k) {
    Index a = static_cast<Index>(rng() % n), b = static_cast<Index>(rng() % n);
    if (a != b) pairs.emplace_back(a, b);
  }
  return pairs;
}

/// Instance over `ref` with the given pairs and intervals d*(1 -/+ slack)
/// around the true distances, with duplicates collapsed.
inline Instance instance_from(const Embedding& ref, const std::vector<std::pair<Index, Index>>& pairs,
                              double slack = 0.0) {
  std::vector<ConstrainedEdge> items;
  for (auto [a, b] : pairs) {
    if (a == b) continue;
    double d = distance(ref[a], ref[b]);
    items.push_back({a, b, {d * (1 - slack), d * (1 + slack), 1.0, 1.0}});
  }
  return make_instance(ref.size(), items, ref, {});
}

inline Instance complete_instance(const Embedding& ref) {
  std::vector<std::pair<Index, Index>> pairs;
  for (Index a = 0; a < ref.size(); ++a)
    for (Index b = a + 1; b < ref.size(); ++b) pairs.emplace_back(a, b);
  return instance_from(ref, pairs);
}

inline Embedding rigidly_moved(const Embedding& x, const Eigen::Matrix3d& r, const Vec3& t) {
  Embedding y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Eigen::Vector3d p(x[i].x, x[i].y, x[i].z);
    Eigen::Vector3d q = r * p;
    y[i] = Vec3{q.x(), q.y(), q.z()} + t;
  }
  return y;
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace idg::testing
