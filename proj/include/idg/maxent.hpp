#pragma once

// Maxent-stress majorization: a geometric schedule of entropy weights alpha,
// and for each alpha a sequence of Laplacian solves
//   L_w x' = b(x),  b_v = sum_{u in N(v)} w_vu d_vu (x_v - x_u) / |x_v - x_u| + alpha * H_v(x)
// where H_v is the entropy force from non-neighbors, refreshed lazily.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "idg/core.hpp"
#include "idg/laplacian.hpp"
#include "idg/octree.hpp"
#include "idg/random.hpp"

namespace idg {

struct TraceRecord {
  int level = 0;           // index into the alpha schedule
  double alpha = 0;
  int step = 0;            // 1-based solve count within the level
  double relative_change = 0;
  double stress = 0;       // after the step
  bool entropy_recomputed = false;
  int entropy_step = 0;    // step at which the cache in use was computed
  int cg_iterations = 0;
};

struct SolveTrace {
  double q = 0;
  std::vector<TraceRecord> records;
  bool early_alpha_exit = false;
};

class SolveError : public NumericalError {
public:
  SolveError(const std::string& msg, SolveTrace trace)
      : NumericalError(msg), trace_(std::move(trace)) {}
  const SolveTrace& trace() const noexcept { return trace_; }

private:
  SolveTrace trace_;
};

/// True when the lazily evaluated entropy term should be refreshed at solve
/// number i (1-based): whenever floor(5 log i) changes.
inline bool lazy_entropy_due(int i, bool log10 = false) {
  if (i < 1) throw ValidationError("lazy_entropy_due: iteration index starts at 1");
  if (i == 1) return true;
  auto level = [log10](int k) {
    return std::floor(5.0 * (log10 ? std::log10(static_cast<double>(k)) : std::log(static_cast<double>(k))));
  };
  return level(i) != level(i - 1);
}

/// q = 0.8 if more than 30% of the vertices have degree 1, otherwise 0.
inline double default_entropy_exponent(const Graph& g) {
  std::size_t leaves = 0;
  for (Index v = 0; v < g.vertex_count(); ++v)
    if (g.degree(v) == 1) ++leaves;
  return g.vertex_count() > 0 && static_cast<double>(leaves) > 0.3 * static_cast<double>(g.vertex_count())
             ? 0.8
             : 0.0;
}

inline double stress(const Graph& g, std::span<const double> d, std::span<const double> w,
                     std::span<const Vec3> x) {
  double s = 0;
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const auto& ed = g.edge(e);
    double diff = distance(x[ed.v], x[ed.w]) - d[e];
    s += w[e] * diff * diff;
  }
  return s;
}

/// Everything about one stress problem that stays fixed across iterations.
struct StressSystem {
  const Graph* graph = nullptr;
  std::vector<double> target;
  std::vector<double> weight;
  LaplacianSystem laplacian;

  StressSystem(const Graph& g, std::vector<double> d, std::vector<double> w)
      : graph(&g), target(std::move(d)), weight(std::move(w)) {
    if (target.size() != g.edge_count() || weight.size() != g.edge_count())
      throw ValidationError("StressSystem: one target and weight per edge required");
    laplacian = assemble_laplacian(g, weight);
  }
};

struct StepInfo {
  int cg_iterations = 0;
};

/// One majorization step from x_prev. `entropy` holds the cached per-vertex
/// entropy forces (unscaled). The result keeps each component's centroid
/// and is then centered globally.
inline Embedding maxent_step(const StressSystem& sys, std::span<const Vec3> x_prev, double alpha,
                             std::span<const Vec3> entropy, const LaplacianSolver& solver,
                             int threads = 1, StepInfo* info = nullptr) {
  const Graph& g = *sys.graph;
  const std::size_t n = g.vertex_count();
  if (x_prev.size() != n) throw ValidationError("maxent_step: embedding size mismatch");
  if (!entropy.empty() && entropy.size() != n)
    throw ValidationError("maxent_step: entropy cache size mismatch");

  std::array<std::vector<double>, 3> b;
  std::array<std::vector<double>, 3> guess;
  for (int a = 0; a < 3; ++a) {
    b[a].assign(n, 0.0);
    guess[a].resize(n);
    for (Index v = 0; v < n; ++v) guess[a][v] = x_prev[v][a];
  }
  for (Index v = 0; v < n; ++v) {
    Vec3 acc;
    for (auto nb : g.neighbors(v)) {
      Vec3 diff = x_prev[v] - x_prev[nb.vertex];
      double r = diff.norm();
      Vec3 dir = r < coincident_distance ? coincident_direction(v, nb.vertex) : diff / r;
      acc += (sys.weight[nb.edge] * sys.target[nb.edge]) * dir;
    }
    if (!entropy.empty() && alpha != 0.0) acc += alpha * entropy[v];
    for (int a = 0; a < 3; ++a) b[a][v] = acc[a];
  }

  std::array<CgResult, 3> sol;
#pragma omp parallel for num_threads(std::min(threads, 3)) if (threads > 1)
  for (int a = 0; a < 3; ++a) sol[a] = solver.solve(sys.laplacian, b[a], guess[a]);

  Embedding x(n);
  for (Index v = 0; v < n; ++v) x[v] = {sol[0].x[v], sol[1].x[v], sol[2].x[v]};

  const auto& L = sys.laplacian;
  if (L.component_count > 1) {
    std::vector<Vec3> shift(L.component_count);
    std::vector<std::size_t> cnt(L.component_count, 0);
    for (Index v = 0; v < n; ++v) {
      shift[L.component[v]] += x_prev[v];
      ++cnt[L.component[v]];
    }
    for (Index v = 0; v < n; ++v)
      x[v] += shift[L.component[v]] / static_cast<double>(cnt[L.component[v]]);
  }
  Vec3 mean;
  for (const auto& p : x) mean += p;
  if (n > 0) mean /= static_cast<double>(n);
  for (auto& p : x) p -= mean;

  if (info) info->cg_iterations = sol[0].iterations + sol[1].iterations + sol[2].iterations;
  return x;
}

/// Convenience form that assembles the system on the fly.
inline Embedding maxent_step(const Graph& g, std::span<const double> d, std::span<const double> w,
                             std::span<const Vec3> x_prev, double alpha,
                             std::span<const Vec3> entropy, double cg_tol = 1e-10,
                             int cg_max_iter = 10000) {
  StressSystem sys(g, {d.begin(), d.end()}, {w.begin(), w.end()});
  ConjugateGradientSolver solver(cg_tol, cg_max_iter);
  return maxent_step(sys, x_prev, alpha, entropy, solver);
}

/// Stress weights: w = weight / d^2, with d floored at 0.1 Å.
inline std::vector<double> stress_weights(const Instance& inst, std::span<const double> d) {
  std::vector<double> w(d.size());
  for (std::size_t e = 0; e < d.size(); ++e) {
    double dd = std::max(d[e], 0.1);
    w[e] = inst.constraints[e].weight / (dd * dd);
  }
  return w;
}

struct SolveResult {
  Embedding x;
  SolveTrace trace;
};

/// The full alpha schedule with midpoint targets.
inline SolveResult maxent_solve(const Instance& inst, const SolverConfig& cfg,
                                std::span<const Vec3> init, const LaplacianSolver* solver = nullptr) {
  cfg.validate();
  const Graph& g = inst.graph;
  const std::size_t n = g.vertex_count();
  if (init.size() != n) throw ValidationError("maxent_solve: initial layout size mismatch");
  if (!all_finite(init)) throw ValidationError("maxent_solve: initial layout not finite");

  auto d = midpoint_distances(inst);
  auto w = stress_weights(inst, d);
  StressSystem sys(g, d, w);

  std::unique_ptr<LaplacianSolver> own;
  if (!solver) {
    own = std::make_unique<ConjugateGradientSolver>(cfg);
    solver = own.get();
  }

  SolveResult res;
  res.trace.q = cfg.q.value_or(default_entropy_exponent(g));
  EntropyOptions eopt{res.trace.q, cfg.theta, cfg.exact_entropy, cfg.normalize_entropy, cfg.threads};

  Embedding x(init.begin(), init.end());
  {
    Vec3 mean;
    for (const auto& p : x) mean += p;
    if (n > 0) mean /= static_cast<double>(n);
    for (auto& p : x) p -= mean;
  }

  auto norm = [](std::span<const Vec3> a) {
    double s = 0;
    for (const auto& p : a) s += p.squared_norm();
    return std::sqrt(s);
  };

  std::vector<Vec3> entropy;
  int quick_levels = 0;
  int level = 0;
  for (double alpha = cfg.alpha_start; alpha >= cfg.alpha_end; alpha *= cfg.alpha_rate, ++level) {
    int entropy_step = 0;
    int steps = 0;
    for (int i = 1; i <= cfg.solves_per_alpha; ++i) {
      TraceRecord rec;
      rec.level = level;
      rec.alpha = alpha;
      rec.step = i;
      if (lazy_entropy_due(i, cfg.lazy_log10)) {
        entropy = entropy_forces(g, x, eopt);
        entropy_step = i;
        rec.entropy_recomputed = true;
      }
      rec.entropy_step = entropy_step;

      StepInfo info;
      Embedding next = maxent_step(sys, x, alpha, entropy, *solver, cfg.threads, &info);
      if (!all_finite(next)) {
        res.trace.records.push_back(rec);
        throw SolveError("maxent_solve: non-finite iterate", std::move(res.trace));
      }
      double xn = norm(x);
      double change = 0;
      for (Index v = 0; v < n; ++v) change += (next[v] - x[v]).squared_norm();
      change = std::sqrt(change);
      rec.relative_change = xn > 0 ? change / xn : change;
      rec.cg_iterations = info.cg_iterations;
      x = std::move(next);
      rec.stress = stress(g, d, w, x);
      res.trace.records.push_back(rec);
      steps = i;
      if (rec.relative_change < cfg.conv_tol) break;
    }
    quick_levels = steps == 1 ? quick_levels + 1 : 0;
    if (cfg.early_alpha_exit && quick_levels >= 2) {
      res.trace.early_alpha_exit = true;
      break;
    }
  }
  res.x = std::move(x);
  return res;
}

}  // namespace idg
