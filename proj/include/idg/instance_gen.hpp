#pragma once

// Benchmark instances from atomic coordinates: covalent bonds and contact
// pairs, the normal / bonds / weighted recipes, and synthetic structures.

#include <algorithm>
#include <array>
#include <iterator>
#include <string_view>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "idg/core.hpp"
#include "idg/metrics.hpp"
#include "idg/pdb.hpp"
#include "idg/random.hpp"

namespace idg {

inline constexpr double default_contact_cutoff = 5.0;

/// Uniform grid for fixed-radius neighbor queries.
class SpatialGrid {
public:
  SpatialGrid(std::span<const Vec3> points, double cell) : points_(points), cell_(cell) {
    if (!(cell > 0) || !std::isfinite(cell)) return;  // degenerate: brute force
    for (Index i = 0; i < points.size(); ++i) cells_[key(cell_of(points[i]))].push_back(i);
  }

  /// Calls f(i, j, dist) for every pair i < j with dist < radius (or <= when inclusive).
  template <class F>
  void for_each_pair(double radius, bool inclusive, F&& f) const {
    auto within = [&](double d) { return inclusive ? d <= radius : d < radius; };
    if (cells_.empty()) {
      for (Index i = 0; i < points_.size(); ++i)
        for (Index j = i + 1; j < points_.size(); ++j) {
          double d = distance(points_[i], points_[j]);
          if (within(d)) f(i, j, d);
        }
      return;
    }
    for (Index i = 0; i < points_.size(); ++i) {
      auto c = cell_of(points_[i]);
      for (long dx = -1; dx <= 1; ++dx)
        for (long dy = -1; dy <= 1; ++dy)
          for (long dz = -1; dz <= 1; ++dz) {
            auto it = cells_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
            if (it == cells_.end()) continue;
            for (Index j : it->second) {
              if (j <= i) continue;
              double d = distance(points_[i], points_[j]);
              if (within(d)) f(i, j, d);
            }
          }
    }
  }

private:
  using Cell = std::array<long, 3>;
  Cell cell_of(const Vec3& p) const {
    return {static_cast<long>(std::floor(p.x / cell_)), static_cast<long>(std::floor(p.y / cell_)),
            static_cast<long>(std::floor(p.z / cell_))};
  }
  static std::uint64_t key(const Cell& c) {
    return hash_combine(static_cast<std::uint64_t>(c[0]), static_cast<std::uint64_t>(c[1]),
                        static_cast<std::uint64_t>(c[2]));
  }

  std::span<const Vec3> points_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<Index>> cells_;
};

/// Covalent bond length threshold for an element pair (Å).
inline double bond_threshold(std::string_view a, std::string_view b) {
  auto is = [](std::string_view e, std::string_view s) { return e == s; };
  if (is(a, "H") || is(b, "H")) return 1.2;
  if (is(a, "S") || is(b, "S")) return 2.0;
  auto cno = [](std::string_view e) { return e == "C" || e == "N" || e == "O"; };
  if (cno(a) && cno(b)) return 1.8;
  return 1.9;
}

inline std::vector<Edge> infer_bonds(const AtomSet& atoms) {
  auto x = atoms.coordinates();
  std::vector<Edge> bonds;
  SpatialGrid grid(x, 2.0);
  grid.for_each_pair(2.0, true, [&](Index i, Index j, double d) {
    if (d <= bond_threshold(atoms.atoms[i].element, atoms.atoms[j].element)) bonds.push_back({i, j});
  });
  std::sort(bonds.begin(), bonds.end());
  return bonds;
}

/// All pairs closer than `cutoff`, in canonical order.
inline std::vector<Edge> pairs_within(std::span<const Vec3> x, double cutoff) {
  std::vector<Edge> pairs;
  SpatialGrid grid(x, cutoff);
  grid.for_each_pair(cutoff, false, [&](Index i, Index j, double) { pairs.push_back({i, j}); });
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

/// Pairs closer than `cutoff` that are not bonds.
inline std::vector<Edge> contact_edges(const AtomSet& atoms, double cutoff, std::span<const Edge> bonds) {
  if (!(cutoff > 0)) throw ValidationError("contact_edges: cutoff must be positive");
  auto all = pairs_within(atoms.coordinates(), cutoff);
  std::vector<Edge> sorted_bonds(bonds.begin(), bonds.end());
  std::sort(sorted_bonds.begin(), sorted_bonds.end());
  std::vector<Edge> out;
  std::set_difference(all.begin(), all.end(), sorted_bonds.begin(), sorted_bonds.end(),
                      std::back_inserter(out));
  return out;
}

struct NoiseSpec {
  double p = 0.5;
  double sigma = 0.1;
  double cutoff = default_contact_cutoff;
  std::uint64_t seed = 1;
};

namespace detail {

/// [d - |d N(0,s)|, d + |d N(0,s)|], lower end clamped at 0.
inline DistanceConstraint noisy_interval(double d, double sigma, std::mt19937_64& rng) {
  DistanceConstraint c;
  if (sigma > 0) {
    std::normal_distribution<double> noise(0.0, sigma);
    double below = std::abs(d * noise(rng));
    double above = std::abs(d * noise(rng));
    c.lower = std::max(0.0, d - below);
    c.upper = d + above;
  } else {
    c.lower = c.upper = d;
  }
  return c;
}

inline InstanceMeta recipe_meta(const std::string& recipe, const NoiseSpec& spec, const std::string& source) {
  InstanceMeta meta;
  meta.source = source;
  meta.seed = spec.seed;
  meta.params["recipe"] = recipe;
  meta.params["p"] = std::to_string(spec.p);
  meta.params["sigma"] = std::to_string(spec.sigma);
  meta.params["cutoff"] = std::to_string(spec.cutoff);
  return meta;
}

}  // namespace detail

/// Each atom pair closer than the cutoff enters independently with
/// probability p, with a noisy interval around its true distance.
inline Instance gen_normal_instance(const AtomSet& atoms, const NoiseSpec& spec,
                                    const std::string& source = "") {
  if (!(spec.p > 0 && spec.p <= 1)) throw ValidationError("gen_normal_instance: need 0 < p <= 1");
  if (!(spec.sigma >= 0)) throw ValidationError("gen_normal_instance: sigma must be non-negative");
  auto x = atoms.coordinates();
  auto pool = std::isfinite(spec.cutoff) ? pairs_within(x, spec.cutoff) : std::vector<Edge>{};
  if (!std::isfinite(spec.cutoff))
    for (Index i = 0; i < x.size(); ++i)
      for (Index j = i + 1; j < x.size(); ++j) pool.push_back({i, j});

  std::mt19937_64 rng(spec.seed);
  std::bernoulli_distribution keep(spec.p);
  std::vector<ConstrainedEdge> items;
  for (const auto& e : pool) {
    if (!keep(rng)) continue;
    double d = distance(x[e.v], x[e.w]);
    items.push_back({e.v, e.w, detail::noisy_interval(d, spec.sigma, rng)});
  }
  if (items.empty()) throw ValidationError("gen_normal_instance: sampling produced no edges");
  return make_instance(atoms.size(), std::move(items), std::move(x),
                       detail::recipe_meta("normal", spec, source));
}

/// All covalent bonds with exact distances plus a noisy fraction p of the
/// contact pairs.
inline Instance gen_bonds_instance(const AtomSet& atoms, const NoiseSpec& spec,
                                   const std::string& source = "") {
  if (!(spec.p >= 0 && spec.p <= 1)) throw ValidationError("gen_bonds_instance: need 0 <= p <= 1");
  if (!(spec.sigma >= 0)) throw ValidationError("gen_bonds_instance: sigma must be non-negative");
  auto x = atoms.coordinates();
  auto bonds = infer_bonds(atoms);
  auto contacts = contact_edges(atoms, spec.cutoff, bonds);

  std::vector<ConstrainedEdge> items;
  for (const auto& b : bonds) {
    double d = distance(x[b.v], x[b.w]);
    items.push_back({b.v, b.w, {d, d, 1.0, 1.0}});
  }
  std::mt19937_64 rng(spec.seed);
  std::bernoulli_distribution keep(spec.p);
  for (const auto& e : contacts) {
    if (!keep(rng)) continue;
    double d = distance(x[e.v], x[e.w]);
    items.push_back({e.v, e.w, detail::noisy_interval(d, spec.sigma, rng)});
  }
  if (items.empty()) throw ValidationError("gen_bonds_instance: instance has no edges");
  return make_instance(atoms.size(), std::move(items), std::move(x),
                       detail::recipe_meta("bonds", spec, source));
}

/// Exact bonds (confidence 1) plus a fraction p of contact pairs split at
/// random 25/50/25 into: +-0.1 Å intervals with confidence 1, sigma 0.1 noise
/// with confidence 0.75, sigma 0.5 noise with confidence 0.5. Weights follow
/// confidence_weight.
inline Instance gen_weighted_instance(const AtomSet& atoms, double p, std::uint64_t seed,
                                      double cutoff = default_contact_cutoff,
                                      const std::string& source = "") {
  if (!(p > 0 && p <= 1)) throw ValidationError("gen_weighted_instance: need 0 < p <= 1");
  auto x = atoms.coordinates();
  auto bonds = infer_bonds(atoms);
  auto contacts = contact_edges(atoms, cutoff, bonds);

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(p);
  std::vector<Edge> sampled;
  for (const auto& e : contacts)
    if (keep(rng)) sampled.push_back(e);
  if (sampled.size() < 4)
    throw ValidationError("gen_weighted_instance: fewer than 4 contact edges sampled");
  std::shuffle(sampled.begin(), sampled.end(), rng);

  const std::size_t k = sampled.size();
  const auto certain = static_cast<std::size_t>(std::llround(0.25 * static_cast<double>(k)));
  const auto medium = static_cast<std::size_t>(std::llround(0.5 * static_cast<double>(k)));

  std::vector<ConstrainedEdge> items;
  const double w_exact = confidence_weight(1.0);
  for (const auto& b : bonds) {
    double d = distance(x[b.v], x[b.w]);
    items.push_back({b.v, b.w, {d, d, 1.0, w_exact}});
  }
  for (std::size_t i = 0; i < k; ++i) {
    const auto& e = sampled[i];
    double d = distance(x[e.v], x[e.w]);
    DistanceConstraint c;
    if (i < certain) {
      c = {std::max(0.0, d - 0.1), d + 0.1, 1.0, 0.0};
    } else if (i < certain + medium) {
      c = detail::noisy_interval(d, 0.1, rng);
      c.confidence = 0.75;
    } else {
      c = detail::noisy_interval(d, 0.5, rng);
      c.confidence = 0.5;
    }
    c.weight = confidence_weight(c.confidence);
    items.push_back({e.v, e.w, c});
  }
  NoiseSpec spec{p, 0.0, cutoff, seed};
  auto meta = detail::recipe_meta("weighted", spec, source);
  meta.params.erase("sigma");
  return make_instance(atoms.size(), std::move(items), std::move(x), std::move(meta));
}

// ---------------------------------------------------------------------------
// synthetic structures

inline AtomSet atoms_from_points(std::span<const Vec3> pts, const std::string& element = "C") {
  AtomSet set;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Atom a;
    a.serial = static_cast<int>(i + 1);
    a.name = element;
    a.element = element;
    a.chain = 'A';
    a.residue = static_cast<int>(i + 1);
    a.pos = pts[i];
    set.atoms.push_back(a);
  }
  return set;
}

inline AtomSet synthetic_cloud(std::size_t n, double side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.0, side);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = {coord(rng), coord(rng), coord(rng)};
  return atoms_from_points(pts);
}

struct ChainSpec {
  std::size_t n = 400;
  double bond = 1.5;            // consecutive distance, Å
  double angle_min = 100.0;     // bond angle window, degrees
  double angle_max = 120.0;
  double min_separation = 2.5;  // between atoms three or more bonds apart
  double density = 0.06;        // atoms per Å^3 of the confining ball
  std::uint64_t seed = 1;
};

/// Self-avoiding chain with fixed bond length and a bond-angle window, grown
/// inside a ball sized for the requested density. Dead ends backtrack.
inline AtomSet synthetic_chain(const ChainSpec& spec) {
  const std::size_t n = spec.n;
  std::vector<Vec3> pts;
  if (n == 0) return {};
  const double radius =
      std::cbrt(3.0 * static_cast<double>(n) / (4.0 * std::numbers::pi * spec.density));
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto random_dir = [&] {
    double z = 2 * unit(rng) - 1, phi = 2 * std::numbers::pi * unit(rng);
    double r = std::sqrt(1 - z * z);
    return Vec3{r * std::cos(phi), r * std::sin(phi), z};
  };
  const double cos_lo = std::cos((180.0 - spec.angle_min) * std::numbers::pi / 180.0);
  const double cos_hi = std::cos((180.0 - spec.angle_max) * std::numbers::pi / 180.0);

  auto acceptable = [&](const Vec3& cand) {
    if (cand.norm() > radius) return false;
    const std::size_t k = pts.size();
    for (std::size_t j = 0; j + 2 < k; ++j)
      if (distance(cand, pts[j]) < spec.min_separation) return false;
    return true;
  };

  pts.push_back({0, 0, 0});
  std::vector<int> failures(n, 0);
  while (pts.size() < n) {
    const std::size_t k = pts.size();
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      Vec3 dir = random_dir();
      if (k >= 2) {
        Vec3 prev = (pts[k - 1] - pts[k - 2]) / spec.bond;
        double c = dir.dot(prev);  // cosine between successive bond vectors
        if (c < std::min(cos_lo, cos_hi) || c > std::max(cos_lo, cos_hi)) continue;
      }
      Vec3 cand = pts[k - 1] + spec.bond * dir;
      if (acceptable(cand)) {
        pts.push_back(cand);
        placed = true;
      }
    }
    if (!placed) {
      // back off a few atoms; give up on hopeless seeds rather than loop forever
      if (++failures[k] > 1000) throw ValidationError("synthetic_chain: could not pack chain");
      std::size_t back = std::min<std::size_t>(k - 1, 1 + failures[k] / 10);
      pts.resize(k - back);
    }
  }
  return atoms_from_points(pts);
}

}  // namespace idg
