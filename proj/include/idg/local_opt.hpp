#pragma once

// Local refinement of an embedding against interval constraints: simulated
// annealing with a spring-force move per edge, a greedy edge-length adjuster,
// and the workflow combining both.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "idg/core.hpp"
#include "idg/metrics.hpp"
#include "idg/octree.hpp"
#include "idg/random.hpp"

namespace idg {

/// Weighted error of edge {v,w} plus the weighted errors of every other edge
/// incident to v or w.
inline double local_error(std::size_t e, std::span<const Vec3> x, const Instance& inst) {
  const auto& ed = inst.graph.edge(e);
  double sum = weighted_edge_error(x, inst, e);
  for (auto nb : inst.graph.neighbors(ed.v))
    if (nb.edge != e) sum += weighted_edge_error(x, inst, nb.edge);
  for (auto nb : inst.graph.neighbors(ed.w))
    if (nb.edge != e) sum += weighted_edge_error(x, inst, nb.edge);
  return sum;
}

/// Net spring force on v from its violating edges: neighbors closer than the
/// lower bound push (x_v - x_u) l^2 / |x_u - x_v|^2, neighbors farther than
/// the upper bound pull (x_u - x_v) u^2 / |x_u - x_v|^2.
inline Vec3 violation_force(Index v, std::span<const Vec3> x, const Instance& inst) {
  Vec3 f;
  for (auto nb : inst.graph.neighbors(v)) {
    const auto& c = inst.constraints[nb.edge];
    Vec3 diff = x[v] - x[nb.vertex];
    double r2 = diff.squared_norm();
    double r = std::sqrt(r2);
    if (interval_error(r, c) <= violation_threshold) continue;
    if (r < c.lower) {
      if (r < coincident_distance)
        f += c.lower * coincident_direction(v, nb.vertex);
      else
        f += diff * (c.lower * c.lower / r2);
    } else {
      f -= diff * (c.upper * c.upper / r2);
    }
  }
  return f;
}

/// Moves only v and w along their spring forces. The step is scaled so that
/// neither endpoint moves farther than cap_fraction * u_vw.
inline std::pair<Vec3, Vec3> local_force_step(std::size_t e, std::span<const Vec3> x,
                                              const Instance& inst, double cap_fraction = 0.25) {
  const auto& ed = inst.graph.edge(e);
  Vec3 fv = violation_force(ed.v, x, inst);
  Vec3 fw = violation_force(ed.w, x, inst);
  double largest = std::max(fv.norm(), fw.norm());
  if (largest == 0) return {x[ed.v], x[ed.w]};
  double cap = cap_fraction * inst.constraints[e].upper;
  double scale = largest > cap ? cap / largest : 1.0;
  return {x[ed.v] + scale * fv, x[ed.w] + scale * fw};
}

/// Metropolis rule on the local error; `uniform` is a draw from [0,1).
inline bool sa_accept(double t, double old_err, double new_err, double uniform) {
  if (new_err <= old_err) return true;
  return uniform < std::exp(-(new_err - old_err) / t);
}

/// Partition of the edges into batches whose members neither share a vertex
/// nor touch each other's neighborhoods, so every edge of a batch can be moved
/// independently. Greedy over canonical edge order.
inline std::vector<std::vector<Index>> independent_edge_batches(const Graph& g) {
  const std::size_t m = g.edge_count();
  constexpr Index none = std::numeric_limits<Index>::max();
  std::vector<Index> color(m, none);
  std::vector<Index> seen;  // seen[c] == e marks color c forbidden for edge e
  std::vector<std::vector<Index>> batches;
  for (Index e = 0; e < m; ++e) {
    const auto& ed = g.edge(e);
    auto forbid_around = [&](Index a) {
      for (auto nb : g.neighbors(a))
        if (color[nb.edge] != none) seen[color[nb.edge]] = e;
    };
    for (Index end : {ed.v, ed.w}) {
      forbid_around(end);
      for (auto nb : g.neighbors(end)) forbid_around(nb.vertex);
    }
    Index c = 0;
    while (c < seen.size() && seen[c] == e) ++c;
    if (c == seen.size()) {
      seen.push_back(none);
      batches.emplace_back();
    }
    color[e] = c;
    batches[c].push_back(e);
  }
  return batches;
}

struct SAConfig {
  double t_start = 0.3;
  double cooling = 0.1;
  double t_min = 1e-7;
  std::optional<std::size_t> stall_limit;  // default: edge count
  double iteration_factor = 2.0;           // edge trials per level < factor * m
  double modification_factor = 0.5;       // accepted moves per level < factor * m
  double cap_fraction = 0.25;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const {
    if (!(cooling > 0 && cooling < 1)) throw ValidationError("SAConfig: need 0 < cooling < 1");
    if (!(t_min < t_start && t_min > 0)) throw ValidationError("SAConfig: need 0 < t_min < t_start");
  }
};

struct SAStats {
  int levels = 0;
  std::size_t trials = 0;
  std::size_t moves = 0;     // accepted non-trivial moves
  std::size_t rejected = 0;
};

inline Embedding simulated_annealing(const Instance& inst, std::span<const Vec3> x0,
                                     const SAConfig& cfg, SAStats* stats = nullptr) {
  cfg.validate();
  Embedding x(x0.begin(), x0.end());
  const std::size_t m = inst.edge_count();
  SAStats st;
  if (m == 0) {
    if (stats) *stats = st;
    return x;
  }
  const auto batches = independent_edge_batches(inst.graph);
  const auto stall_limit = cfg.stall_limit.value_or(m);
  const double max_iterations = cfg.iteration_factor * static_cast<double>(m);
  const double max_modifications = cfg.modification_factor * static_cast<double>(m);

  double best_total = total_weighted_error(x, inst);
  std::size_t stall = 0;
  double t = cfg.t_start;
  int level = 0;
  do {
    std::size_t iterations = 0, modifications = 0, rejected = 0;
    std::uint64_t pass = 0;
    while (static_cast<double>(iterations) < max_iterations &&
           static_cast<double>(modifications) < max_modifications) {
      for (const auto& batch : batches) {
        if (static_cast<double>(iterations) >= max_iterations ||
            static_cast<double>(modifications) >= max_modifications)
          break;
        std::size_t batch_moves = 0, batch_rejected = 0;
        const auto bs = static_cast<std::int64_t>(batch.size());
#pragma omp parallel for num_threads(cfg.threads) reduction(+ : batch_moves, batch_rejected) if (cfg.threads > 1 && bs > 64)
        for (std::int64_t k = 0; k < bs; ++k) {
          Index e = batch[k];
          const auto& ed = inst.graph.edge(e);
          auto [nv, nw] = local_force_step(e, x, inst, cfg.cap_fraction);
          if (nv == x[ed.v] && nw == x[ed.w]) continue;
          double before = local_error(e, x, inst);
          Vec3 ov = x[ed.v], ow = x[ed.w];
          x[ed.v] = nv;
          x[ed.w] = nw;
          double after = local_error(e, x, inst);
          double u = to_unit_interval(hash_combine(cfg.seed, level, pass, e));
          if (sa_accept(t, before, after, u)) {
            ++batch_moves;
          } else {
            x[ed.v] = ov;
            x[ed.w] = ow;
            ++batch_rejected;
          }
        }
        iterations += batch.size();
        modifications += batch_moves;
        rejected += batch_rejected;
      }
      ++pass;
    }
    st.trials += iterations;
    st.moves += modifications;
    st.rejected += rejected;

    double total = total_weighted_error(x, inst);
    if (total < best_total) {
      best_total = total;
      stall = 0;
    } else {
      ++stall;
    }
    t *= cfg.cooling;
    ++level;
  } while (stall <= stall_limit && t >= cfg.t_min);
  st.levels = level;
  if (stats) *stats = st;
  return x;
}

/// Moves both endpoints symmetrically along the edge axis so the length becomes
/// the violated bound exactly; the midpoint is preserved. Coincident endpoints
/// are separated along a pseudo-random axis to the lower bound.
inline std::pair<Vec3, Vec3> adjust_length(std::size_t e, std::span<const Vec3> x,
                                           const Instance& inst) {
  const auto& ed = inst.graph.edge(e);
  const auto& c = inst.constraints[e];
  Vec3 mid = (x[ed.v] + x[ed.w]) * 0.5;
  Vec3 diff = x[ed.v] - x[ed.w];
  double r = diff.norm();
  Vec3 axis;
  double target;
  if (r < coincident_distance) {
    axis = unit_direction(hash_combine(0xad1u, e));
    target = c.lower;
  } else {
    axis = diff / r;
    target = r > c.upper ? c.upper : (r < c.lower ? c.lower : r);
  }
  return {mid + axis * (0.5 * target), mid - axis * (0.5 * target)};
}

/// Processing order of the greedy optimizer: confidence descending, then
/// weighted error descending, then canonical edge index.
inline std::vector<Index> simple_opt_order(const Instance& inst, std::span<const Vec3> x) {
  std::vector<Index> order;
  std::vector<double> err(inst.edge_count());
  for (Index e = 0; e < inst.edge_count(); ++e) {
    double raw = edge_error(x, inst, e);
    if (raw > violation_threshold) {
      order.push_back(e);
      err[e] = inst.constraints[e].weight * raw;
    }
  }
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    const auto ca = inst.constraints[a].confidence, cb = inst.constraints[b].confidence;
    if (ca != cb) return ca > cb;
    if (err[a] != err[b]) return err[a] > err[b];
    return a < b;
  });
  return order;
}

struct SimpleOptStats {
  int iterations = 0;
  std::size_t accepted = 0;
  std::size_t non_decreasing_accepts = 0;  // must stay 0
};

inline Embedding simple_local_opt(const Instance& inst, std::span<const Vec3> x0,
                                  int max_iterations = 50, SimpleOptStats* stats = nullptr) {
  Embedding x(x0.begin(), x0.end());
  SimpleOptStats st;
  std::vector<char> locked(inst.edge_count());
  for (int it = 1; it <= max_iterations; ++it) {
    st.iterations = it;
    std::fill(locked.begin(), locked.end(), 0);
    std::size_t improved = 0;
    for (Index e : simple_opt_order(inst, x)) {
      if (locked[e]) continue;
      const auto& ed = inst.graph.edge(e);
      double before = local_error(e, x, inst);
      Vec3 ov = x[ed.v], ow = x[ed.w];
      std::tie(x[ed.v], x[ed.w]) = adjust_length(e, x, inst);
      double after = local_error(e, x, inst);
      if (after >= before) {
        x[ed.v] = ov;
        x[ed.w] = ow;
        continue;
      }
      ++improved;
      if (!(after < before)) ++st.non_decreasing_accepts;
      for (Index end : {ed.v, ed.w})
        for (auto nb : inst.graph.neighbors(end)) locked[nb.edge] = 1;
    }
    st.accepted += improved;
    if (improved == 0) break;
  }
  if (stats) *stats = st;
  return x;
}

struct RefineConfig {
  SAConfig sa;
  bool run_sa = true;
  int simple_max_iterations = 50;
};

enum class RefineStage { input, annealed, final };

struct RefineResult {
  Embedding x;
  double ldme_input = 0;
  double ldme_annealed = 0;
  double ldme_final = 0;
  bool annealing_discarded = false;
  RefineStage chosen = RefineStage::input;
  SAStats sa;
  SimpleOptStats simple;
};

/// Annealing, then the greedy optimizer on whichever of {input, annealed} has
/// the lower LDME; returns the best of input, survivor and final.
inline RefineResult refine_workflow(const Instance& inst, std::span<const Vec3> x0,
                                    const RefineConfig& cfg = {}) {
  RefineResult res;
  res.x.assign(x0.begin(), x0.end());
  if (inst.edge_count() == 0) return res;
  res.ldme_input = ldme(x0, inst);

  Embedding survivor(x0.begin(), x0.end());
  double survivor_ldme = res.ldme_input;
  RefineStage survivor_stage = RefineStage::input;
  res.ldme_annealed = res.ldme_input;
  if (cfg.run_sa) {
    Embedding annealed = simulated_annealing(inst, x0, cfg.sa, &res.sa);
    res.ldme_annealed = ldme(annealed, inst);
    if (res.ldme_annealed > res.ldme_input) {
      res.annealing_discarded = true;
    } else {
      survivor = std::move(annealed);
      survivor_ldme = res.ldme_annealed;
      survivor_stage = RefineStage::annealed;
    }
  }
  Embedding final_x = simple_local_opt(inst, survivor, cfg.simple_max_iterations, &res.simple);
  res.ldme_final = ldme(final_x, inst);

  if (res.ldme_final <= survivor_ldme && res.ldme_final <= res.ldme_input) {
    res.x = std::move(final_x);
    res.chosen = RefineStage::final;
  } else if (survivor_ldme <= res.ldme_input) {
    res.x = std::move(survivor);
    res.chosen = survivor_stage;
  }
  return res;
}

}  // namespace idg
