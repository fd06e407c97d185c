#pragma once

// Octree over a point set and Barnes-Hut evaluation of the entropy force
//   F_v = sgn(q) * sum_u (x_v - x_u) / |x_v - x_u|^(q+2),   sgn(0) = 1.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "idg/core.hpp"
#include "idg/random.hpp"

namespace idg {

/// Pairs closer than this are treated as coincident.
inline constexpr double coincident_distance = 1e-12;
/// Magnitude of the separating push between coincident points.
inline constexpr double coincident_force = 1e-3;

inline Vec3 pair_entropy_force(const Vec3& xv, const Vec3& xu, Index v, Index u, double q) {
  Vec3 diff = xv - xu;
  double r2 = diff.squared_norm();
  if (r2 < coincident_distance * coincident_distance)
    return coincident_force * coincident_direction(v, u);
  double scale;
  if (q == 0.0)
    scale = 1.0 / r2;
  else
    scale = (q > 0 ? 1.0 : -1.0) / std::pow(r2, 0.5 * (q + 2.0));
  return diff * scale;
}

class Octree {
public:
  struct Node {
    Vec3 center;         // geometric center of the cube
    double side = 0;     // edge length of the cube
    Vec3 centroid;       // mean of contained points
    std::uint32_t count = 0;
    std::int32_t child[8] = {-1, -1, -1, -1, -1, -1, -1, -1};
    std::uint32_t first = 0;  // leaf points: order_[first, first + count)
    std::uint32_t depth = 0;
    bool leaf = true;

    bool contains(const Vec3& p) const {
      double h = 0.5 * side;
      return std::abs(p.x - center.x) <= h && std::abs(p.y - center.y) <= h &&
             std::abs(p.z - center.z) <= h;
    }
  };

  static constexpr std::uint32_t max_depth = 48;

  explicit Octree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    if (points_.empty()) return;
    Vec3 lo = points_[0], hi = points_[0];
    for (const auto& p : points_)
      for (int k = 0; k < 3; ++k) {
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
    double side = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
    side = side > 0 ? side * (1.0 + 1e-9) : 1.0;
    order_.resize(points_.size());
    for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    nodes_.reserve(2 * points_.size());
    build((lo + hi) * 0.5, side, 0, static_cast<std::uint32_t>(order_.size()), 0);
  }

  std::span<const Node> nodes() const { return nodes_; }
  const Node& root() const { return nodes_.front(); }
  std::span<const Vec3> points() const { return points_; }

  /// Points stored in a leaf.
  std::span<const std::uint32_t> leaf_points(const Node& node) const {
    return {order_.data() + node.first, node.count};
  }

  /// Entropy force on vertex v from every other point. A cell is replaced by
  /// its centroid when side / distance < theta and it does not contain x_v;
  /// theta = 0 gives the exact pair sum.
  Vec3 entropy_force(Index v, double q, double theta) const {
    Vec3 f;
    if (nodes_.empty()) return f;
    const Vec3& xv = points_[v];
    std::vector<std::int32_t> stack{0};
    while (!stack.empty()) {
      const Node& node = nodes_[stack.back()];
      stack.pop_back();
      if (node.leaf) {
        for (auto u : leaf_points(node))
          if (u != v) f += pair_entropy_force(xv, points_[u], v, u, q);
        continue;
      }
      if (theta > 0 && !node.contains(xv)) {
        double dist = distance(xv, node.centroid);
        if (node.side < theta * dist) {
          f += static_cast<double>(node.count) *
               pair_entropy_force(xv, node.centroid, v, v, q);
          continue;
        }
      }
      for (auto c : node.child)
        if (c >= 0) stack.push_back(c);
    }
    return f;
  }

private:
  std::int32_t build(Vec3 center, double side, std::uint32_t first, std::uint32_t last,
                     std::uint32_t depth) {
    auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    {
      Node& node = nodes_.back();
      node.center = center;
      node.side = side;
      node.first = first;
      node.count = last - first;
      node.depth = depth;
      Vec3 sum;
      for (auto i = first; i < last; ++i) sum += points_[order_[i]];
      node.centroid = sum / static_cast<double>(node.count);
    }
    if (last - first <= 1 || depth >= max_depth || coincident(first, last)) return id;

    // bucket points by octant, then recurse into non-empty ones
    std::array<std::vector<std::uint32_t>, 8> buckets;
    for (auto i = first; i < last; ++i) {
      const Vec3& p = points_[order_[i]];
      int oct = (p.x >= center.x ? 1 : 0) | (p.y >= center.y ? 2 : 0) | (p.z >= center.z ? 4 : 0);
      buckets[oct].push_back(order_[i]);
    }
    auto pos = first;
    std::array<std::pair<std::uint32_t, std::uint32_t>, 8> ranges{};
    for (int o = 0; o < 8; ++o) {
      ranges[o] = {pos, pos + static_cast<std::uint32_t>(buckets[o].size())};
      for (auto idx : buckets[o]) order_[pos++] = idx;
    }
    nodes_[id].leaf = false;
    double h = 0.25 * side;
    for (int o = 0; o < 8; ++o) {
      if (ranges[o].first == ranges[o].second) continue;
      Vec3 c{center.x + ((o & 1) ? h : -h), center.y + ((o & 2) ? h : -h),
             center.z + ((o & 4) ? h : -h)};
      auto child = build(c, 0.5 * side, ranges[o].first, ranges[o].second, depth + 1);
      nodes_[id].child[o] = child;
    }
    return id;
  }

  bool coincident(std::uint32_t first, std::uint32_t last) const {
    const Vec3& p0 = points_[order_[first]];
    for (auto i = first + 1; i < last; ++i)
      if (distance(points_[order_[i]], p0) >= coincident_distance) return false;
    return true;
  }

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

inline Octree build_octree(std::span<const Vec3> points) { return Octree(points); }

inline Vec3 entropy_force(const Octree& tree, Index v, double q, double theta) {
  return tree.entropy_force(v, q, theta);
}

struct EntropyOptions {
  double q = 0;
  double theta = 0.6;
  bool exact = false;      // O(n^2) pair loop over non-neighbors
  bool normalize = false;  // divide by the number of non-neighbor pairs of v
  int threads = 1;
};

/// Entropy force on every vertex from its non-neighbors. The octree sums over
/// all points; contributions of graph neighbors are then subtracted exactly.
inline std::vector<Vec3> entropy_forces(const Graph& g, std::span<const Vec3> x,
                                        const EntropyOptions& opt) {
  const std::size_t n = x.size();
  std::vector<Vec3> f(n);
  if (n < 2) return f;

  if (opt.exact) {
    std::vector<char> adjacent(n, 0);
    for (Index v = 0; v < n; ++v) {
      for (auto nb : g.neighbors(v)) adjacent[nb.vertex] = 1;
      for (Index u = 0; u < n; ++u)
        if (u != v && !adjacent[u]) f[v] += pair_entropy_force(x[v], x[u], v, u, opt.q);
      for (auto nb : g.neighbors(v)) adjacent[nb.vertex] = 0;
    }
  } else {
    Octree tree(x);
#pragma omp parallel for num_threads(opt.threads) schedule(static) if (opt.threads > 1)
    for (std::int64_t v = 0; v < static_cast<std::int64_t>(n); ++v)
      f[v] = tree.entropy_force(static_cast<Index>(v), opt.q, opt.theta);
    for (Index v = 0; v < n; ++v)
      for (auto nb : g.neighbors(v))
        f[v] -= pair_entropy_force(x[v], x[nb.vertex], v, nb.vertex, opt.q);
  }
  for (Index v = 0; v < n; ++v) {
    auto others = n - 1 - g.degree(v);
    if (others == 0)
      f[v] = {};
    else if (opt.normalize)
      f[v] /= static_cast<double>(others);
  }
  return f;
}

}  // namespace idg
