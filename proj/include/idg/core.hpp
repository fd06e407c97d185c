#pragma once

// Domain types shared by every part of the library: graphs over atoms,
// interval distance constraints, 3D embeddings, instances and solver
// tunables.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace idg {

using Index = std::uint32_t;

// ---------------------------------------------------------------------------
// errors

class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& msg, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Vec3

struct Vec3 {
  double x = 0, y = 0, z = 0;

  constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
  constexpr Vec3& operator/=(double s) { x /= s; y /= s; z /= s; return *this; }

  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend constexpr Vec3 operator/(Vec3 a, double s) { return a /= s; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;

  constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  constexpr double squared_norm() const { return dot(*this); }
  double norm() const { return std::sqrt(squared_norm()); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

// ---------------------------------------------------------------------------
// Graph

struct Edge {
  Index v = 0;
  Index w = 0;
  friend constexpr auto operator<=>(const Edge&, const Edge&) = default;
};

struct Neighbor {
  Index vertex;
  Index edge;
};

/// Undirected simple graph. Edges are stored in canonical order: each edge
/// as (min, max), sorted lexicographically. Adjacency is CSR.
class Graph {
public:
  Graph() = default;

  std::size_t vertex_count() const noexcept { return n_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::span<const Edge> edges() const noexcept { return edges_; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }

  std::span<const Neighbor> neighbors(Index v) const {
    return {adj_.data() + offsets_[v], adj_.data() + offsets_[v + 1]};
  }
  std::size_t degree(Index v) const { return offsets_[v + 1] - offsets_[v]; }

  /// Edge index of {v,w}, if present.
  std::optional<Index> find_edge(Index v, Index w) const {
    Edge key{std::min(v, w), std::max(v, w)};
    auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
    if (it == edges_.end() || *it != key) return std::nullopt;
    return static_cast<Index>(it - edges_.begin());
  }
  bool adjacent(Index v, Index w) const { return find_edge(v, w).has_value(); }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.n_ == b.n_ && a.edges_ == b.edges_;
  }

  /// Builds from already canonical, sorted, unique edges.
  static Graph from_canonical(std::size_t n, std::vector<Edge> edges) {
    Graph g;
    g.n_ = n;
    g.edges_ = std::move(edges);
    g.offsets_.assign(n + 1, 0);
    for (const auto& e : g.edges_) {
      ++g.offsets_[e.v + 1];
      ++g.offsets_[e.w + 1];
    }
    for (std::size_t i = 0; i < n; ++i) g.offsets_[i + 1] += g.offsets_[i];
    g.adj_.resize(2 * g.edges_.size());
    std::vector<std::size_t> fill(g.offsets_.begin(), g.offsets_.end() - 1);
    for (Index i = 0; i < g.edges_.size(); ++i) {
      const auto& e = g.edges_[i];
      g.adj_[fill[e.v]++] = {e.w, i};
      g.adj_[fill[e.w]++] = {e.v, i};
    }
    return g;
  }

private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<Neighbor> adj_;
};

inline Edge canonical_edge(Index v, Index w) { return {std::min(v, w), std::max(v, w)}; }

/// Normalizes an edge list into a graph: duplicates (in either orientation)
/// are merged, self-loops and out-of-range ids rejected.
inline Graph build_graph(std::size_t n, std::span<const std::pair<Index, Index>> pairs) {
  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (auto [v, w] : pairs) {
    if (v >= n || w >= n)
      throw ValidationError("edge (" + std::to_string(v) + "," + std::to_string(w) +
                            ") references a vertex outside [0," + std::to_string(n) + ")");
    if (v == w) throw ValidationError("self-loop at vertex " + std::to_string(v));
    edges.push_back(canonical_edge(v, w));
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return Graph::from_canonical(n, std::move(edges));
}

inline Graph build_graph(std::size_t n, std::initializer_list<std::pair<Index, Index>> pairs) {
  return build_graph(n, std::span<const std::pair<Index, Index>>(pairs.begin(), pairs.size()));
}

/// Connected component id per vertex; ids are assigned in order of the
/// lowest vertex of each component.
inline std::vector<Index> connected_components(const Graph& g, std::size_t* count = nullptr) {
  constexpr Index unset = std::numeric_limits<Index>::max();
  std::vector<Index> comp(g.vertex_count(), unset);
  std::vector<Index> stack;
  Index next = 0;
  for (Index s = 0; s < g.vertex_count(); ++s) {
    if (comp[s] != unset) continue;
    comp[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      Index v = stack.back();
      stack.pop_back();
      for (auto nb : g.neighbors(v))
        if (comp[nb.vertex] == unset) {
          comp[nb.vertex] = next;
          stack.push_back(nb.vertex);
        }
    }
    ++next;
  }
  if (count) *count = next;
  return comp;
}

// ---------------------------------------------------------------------------
// constraints, embeddings, instances

struct DistanceConstraint {
  double lower = 0;       // Å
  double upper = 0;       // Å
  double confidence = 1;  // [0,1]
  double weight = 1;      // error / stress multiplier

  double midpoint() const { return 0.5 * (lower + upper); }
  friend bool operator==(const DistanceConstraint&, const DistanceConstraint&) = default;
};

using Embedding = std::vector<Vec3>;

inline bool all_finite(std::span<const Vec3> x) {
  return std::all_of(x.begin(), x.end(), [](const Vec3& p) { return p.finite(); });
}

struct InstanceMeta {
  std::string source;
  std::map<std::string, std::string> params;
  std::uint64_t seed = 0;
  friend bool operator==(const InstanceMeta&, const InstanceMeta&) = default;
};

struct Instance {
  Graph graph;
  std::vector<DistanceConstraint> constraints;  // parallel to graph.edges()
  std::optional<Embedding> reference;
  InstanceMeta meta;

  std::size_t vertex_count() const { return graph.vertex_count(); }
  std::size_t edge_count() const { return graph.edge_count(); }
  friend bool operator==(const Instance&, const Instance&) = default;
};

struct ConstrainedEdge {
  Index v;
  Index w;
  DistanceConstraint c;
};

/// Assembles an instance from edges given in any order; constraints are
/// permuted into canonical edge order. Exact duplicates collapse, conflicting
/// duplicates are rejected.
inline Instance make_instance(std::size_t n, std::vector<ConstrainedEdge> items,
                              std::optional<Embedding> reference = std::nullopt,
                              InstanceMeta meta = {}) {
  for (auto& it : items) {
    if (it.v >= n || it.w >= n) throw ValidationError("edge references vertex out of range");
    if (it.v == it.w) throw ValidationError("self-loop at vertex " + std::to_string(it.v));
    if (it.v > it.w) std::swap(it.v, it.w);
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return std::pair(a.v, a.w) < std::pair(b.v, b.w);
  });
  std::vector<Edge> edges;
  std::vector<DistanceConstraint> cons;
  for (const auto& it : items) {
    if (!edges.empty() && edges.back() == Edge{it.v, it.w}) {
      if (!(cons.back() == it.c))
        throw ValidationError("conflicting constraints for edge (" + std::to_string(it.v) + "," +
                              std::to_string(it.w) + ")");
      continue;
    }
    edges.push_back({it.v, it.w});
    cons.push_back(it.c);
  }
  if (reference && reference->size() != n)
    throw ValidationError("reference size does not match vertex count");
  Instance inst;
  inst.graph = Graph::from_canonical(n, std::move(edges));
  inst.constraints = std::move(cons);
  inst.reference = std::move(reference);
  inst.meta = std::move(meta);
  return inst;
}

struct Diagnostics {
  std::size_t bound_violations = 0;  // lower > upper
  std::size_t non_finite = 0;
  std::size_t components = 0;
  std::size_t isolated_vertices = 0;
  bool size_mismatch = false;
  std::vector<std::string> messages;

  bool ok() const { return bound_violations == 0 && non_finite == 0 && !size_mismatch; }
};

inline Diagnostics validate_instance(const Instance& inst) {
  Diagnostics d;
  const auto& g = inst.graph;
  if (inst.constraints.size() != g.edge_count()) {
    d.size_mismatch = true;
    d.messages.push_back("constraint count differs from edge count");
  }
  if (inst.reference && inst.reference->size() != g.vertex_count()) {
    d.size_mismatch = true;
    d.messages.push_back("reference size differs from vertex count");
  }
  for (std::size_t e = 0; e < inst.constraints.size(); ++e) {
    const auto& c = inst.constraints[e];
    if (!std::isfinite(c.lower) || !std::isfinite(c.upper) || !std::isfinite(c.weight) ||
        !std::isfinite(c.confidence)) {
      ++d.non_finite;
      d.messages.push_back("edge " + std::to_string(e) + ": non-finite value");
    } else if (c.lower > c.upper) {
      ++d.bound_violations;
      d.messages.push_back("edge " + std::to_string(e) + ": lower bound exceeds upper bound");
    }
  }
  connected_components(g, &d.components);
  for (Index v = 0; v < g.vertex_count(); ++v)
    if (g.degree(v) == 0) ++d.isolated_vertices;
  if (d.components > 1)
    d.messages.push_back("graph has " + std::to_string(d.components) + " connected components");
  return d;
}

inline std::vector<double> midpoint_distances(const Instance& inst) {
  std::vector<double> d(inst.constraints.size());
  std::transform(inst.constraints.begin(), inst.constraints.end(), d.begin(),
                 [](const DistanceConstraint& c) { return c.midpoint(); });
  return d;
}

/// Penalty multiplier for an interval of confidence c: 1 + 5 exp(-5 (1 - c)).
inline double confidence_weight(double c) {
  if (!(c >= 0.0 && c <= 1.0))
    throw ValidationError("confidence must lie in [0,1], got " + std::to_string(c));
  return 1.0 + 5.0 * std::exp(-5.0 * (1.0 - c));
}

// ---------------------------------------------------------------------------
// solver configuration

enum class InitialLayout { pivot_mds, hypersphere, random_cube };

struct SolverConfig {
  double alpha_start = 1.0;
  double alpha_end = 0.008;
  double alpha_rate = 0.3;
  std::optional<double> q;  // unset: 0, or 0.8 when > 30% of vertices have degree 1
  int solves_per_alpha = 50;
  double conv_tol = 1e-3;
  double cg_tol = 1e-6;
  int cg_max_iter = 1000;
  double theta = 0.6;
  std::uint64_t seed = 1;
  int threads = 1;

  bool normalize_entropy = true;
  bool lazy_log10 = false;
  bool exact_entropy = false;  // O(n^2) pair sum instead of the octree
  bool early_alpha_exit = true;

  InitialLayout init = InitialLayout::pivot_mds;
  std::size_t pivots = 250;

  void validate() const {
    if (!(alpha_end > 0 && alpha_start >= alpha_end))
      throw ValidationError("need alpha_start >= alpha_end > 0");
    if (!(alpha_rate > 0 && alpha_rate < 1)) throw ValidationError("need 0 < alpha_rate < 1");
    if (q && !(*q > -2)) throw ValidationError("need q > -2");
    if (!(conv_tol > 0 && cg_tol > 0)) throw ValidationError("tolerances must be positive");
    if (solves_per_alpha < 1 || cg_max_iter < 1)
      throw ValidationError("iteration caps must be positive");
    if (!(theta >= 0)) throw ValidationError("theta must be non-negative");
  }
};

}  // namespace idg
