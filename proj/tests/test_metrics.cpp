#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "idg/metrics.hpp"
#include "support.hpp"

using namespace idg;
using idg::testing::random_points;
using idg::testing::random_rotation;
using idg::testing::rigidly_moved;

namespace {

Instance single_edge(double lo, double hi) { return make_instance(2, {{0, 1, {lo, hi}}}); }

Embedding pair_at(double r) { return {{0, 0, 0}, {r, 0, 0}}; }

// RMSD for a fixed rotation with the optimal (centroid) translation.
double rmsd_for_rotation(const Embedding& x, const Embedding& ref, const Eigen::Matrix3d& r) {
  Vec3 cx, cr;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cx += x[i];
    cr += ref[i];
  }
  cx /= static_cast<double>(x.size());
  cr /= static_cast<double>(x.size());
  double sum = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Vec3 p = x[i] - cx;
    Eigen::Vector3d q = r * Eigen::Vector3d(p.x, p.y, p.z);
    sum += (Vec3{q.x(), q.y(), q.z()} - (ref[i] - cr)).squared_norm();
  }
  return std::sqrt(sum / static_cast<double>(x.size()));
}

// Coarse random search over rotations followed by shrinking local search.
double rotation_search_rmsd(const Embedding& x, const Embedding& ref) {
  std::mt19937_64 rng(99);
  Eigen::Matrix3d best_r = Eigen::Matrix3d::Identity();
  double best = rmsd_for_rotation(x, ref, best_r);
  for (int k = 0; k < 20000; ++k) {
    auto r = random_rotation(rng);
    double v = rmsd_for_rotation(x, ref, r);
    if (v < best) best = v, best_r = r;
  }
  std::normal_distribution<double> g(0, 1);
  for (double step = 0.1; step > 1e-7; step *= 0.7)
    for (int k = 0; k < 200; ++k) {
      Eigen::Vector3d axis(g(rng), g(rng), g(rng));
      Eigen::Matrix3d r = Eigen::AngleAxisd(step * g(rng), axis.normalized()).toRotationMatrix() * best_r;
      double v = rmsd_for_rotation(x, ref, r);
      if (v < best) best = v, best_r = r;
    }
  return best;
}

}  // namespace

TEST(EdgeError, Examples) {
  DistanceConstraint c{1, 2};
  EXPECT_DOUBLE_EQ(interval_error(1.5, c), 0.0);
  EXPECT_DOUBLE_EQ(interval_error(2.5, c), 0.25);
  EXPECT_DOUBLE_EQ(interval_error(0.5, c), 0.25);
  EXPECT_DOUBLE_EQ(edge_error(pair_at(2.5), Edge{0, 1}, c), 0.25);
}

TEST(Ldme, Examples) {
  EXPECT_DOUBLE_EQ(ldme(pair_at(1.5), single_edge(1, 2)), 0.0);
  EXPECT_DOUBLE_EQ(ldme(pair_at(2.5), single_edge(1, 2)), 0.5);
  auto inst = make_instance(3, {{0, 1, {1, 2}}, {1, 2, {1, 2}}});
  Embedding x{{0, 0, 0}, {1.5, 0, 0}, {4.0, 0, 0}};
  EXPECT_NEAR(ldme(x, inst), std::sqrt(0.125), 1e-15);
  EXPECT_THROW(ldme(x, make_instance(3, {})), ValidationError);
}

TEST(Ldme, MatchesNaiveLoop) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 8;
    auto x = random_points(n, 5.0, rng());
    std::vector<ConstrainedEdge> items;
    for (int k = 0; k < 10; ++k) {
      Index a = rng() % n, b = rng() % n;
      if (a == b) continue;
      double l = u(rng), h = l + u(rng) * 0.3;
      items.push_back({a, b, {l, h}});
    }
    Instance inst;
    try {
      inst = make_instance(n, items);
    } catch (const ValidationError&) {
      continue;  // random duplicate with different bounds
    }
    if (inst.edge_count() == 0) continue;
    double sum = 0;
    for (std::size_t e = 0; e < inst.edge_count(); ++e) {
      auto ed = inst.graph.edge(e);
      double dx = x[ed.v].x - x[ed.w].x, dy = x[ed.v].y - x[ed.w].y, dz = x[ed.v].z - x[ed.w].z;
      double len = std::sqrt(dx * dx + dy * dy + dz * dz);
      double lo = inst.constraints[e].lower, hi = inst.constraints[e].upper;
      double ex = len < lo ? lo - len : (len > hi ? len - hi : 0.0);
      sum += ex * ex;
    }
    EXPECT_EQ(ldme(x, inst), std::sqrt(sum / static_cast<double>(inst.edge_count())));
  }
}

TEST(ViolationStats, CountsAndThreshold) {
  auto inst = make_instance(5, {{0, 1, {1, 1}}, {1, 2, {1, 1}}, {2, 3, {1, 1}}, {3, 4, {1, 1}}});
  Embedding x{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}, {4, 0, 0}};
  auto s = violation_stats(x, inst);
  EXPECT_EQ(s.count, 0u);
  EXPECT_EQ(ldme(x, inst), 0.0);
  x[4].x = 5.0;
  s = violation_stats(x, inst);
  EXPECT_EQ(s.count, 1u);
  EXPECT_DOUBLE_EQ(s.fraction, 0.25);
  EXPECT_DOUBLE_EQ(s.max_error, 1.0);
}

TEST(ViolationStats, ErrorAtThresholdNotCounted) {
  EXPECT_FALSE(is_violation(1e-9));
  EXPECT_TRUE(is_violation(std::nextafter(1e-9, 1.0)));
  EXPECT_FALSE(is_violation(0.0));
}

TEST(ViolationStats, LdmeZeroIffNoViolation) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto ref = random_points(6, 5, rng());
    auto inst = idg::testing::instance_from(ref, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}}, 0.1);
    auto x = ref;
    if (trial % 2) x[rng() % 6].x += 3.0;
    EXPECT_EQ(ldme(x, inst) == 0.0, violation_stats(x, inst).count == 0);
  }
}

TEST(Kabsch, IdentityOnEqualSets) {
  auto p = random_points(10, 5, 1);
  auto res = kabsch_superpose(p, p);
  EXPECT_LT((res.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(res.translation.norm(), 1e-12);
  EXPECT_LT(res.rmsd, 1e-12);
}

TEST(Kabsch, RecoversRigidMotion) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = random_points(10, 10, rng());
    auto r = random_rotation(rng);
    Vec3 t{u(rng), u(rng), u(rng)};
    auto q = rigidly_moved(p, r, t);
    auto res = kabsch_superpose(p, q);
    EXPECT_LT(res.rmsd, 1e-9);
    EXPECT_LT((res.rotation - r).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((res.rotation.transpose() * res.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(res.rotation.determinant(), 1.0, 1e-12);
  }
}

TEST(Kabsch, CoincidentPointsGiveIdentity) {
  Embedding a(5, Vec3{1, 2, 3}), b(5, Vec3{-4, 0, 2});
  auto res = kabsch_superpose(a, b);
  EXPECT_EQ(res.rotation, Eigen::Matrix3d::Identity());
  EXPECT_LT(res.rmsd, 1e-12);
}

TEST(Kabsch, RejectsMismatchedSizes) {
  EXPECT_THROW(kabsch_superpose(random_points(3, 1, 1), random_points(4, 1, 1)), ValidationError);
}

TEST(Rmsd, SelfAndMirrorAreZero) {
  auto p = random_points(12, 8, 4);
  EXPECT_LT(rmsd(p, p), 1e-12);
  auto m = p;
  for (auto& v : m) v.x = -v.x;
  EXPECT_LT(rmsd(m, p), 1e-9);
  EXPECT_GT(kabsch_superpose(m, p).rmsd, 0.1);  // no proper rotation does it
}

TEST(Rmsd, RigidMotionInvariance) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    auto a = random_points(15, 10, rng());
    auto b = random_points(15, 10, rng());
    double base = rmsd(a, b);
    auto r = random_rotation(rng);
    EXPECT_NEAR(rmsd(rigidly_moved(a, r, {1, -2, 3}), b), base, 1e-9);
    EXPECT_NEAR(rmsd(a, rigidly_moved(b, r, {-5, 0, 7})), base, 1e-9);
  }
}

TEST(Rmsd, DisplacedPointAgainstRotationSearch) {
  Embedding ref{{0, 0, 0}, {3, 0, 0}, {0, 3, 0}, {0, 0, 3}};
  auto x = ref;
  x[3].z += 2.0;
  // without re-superposition the error is 2/sqrt(4)
  double raw = 0;
  for (std::size_t i = 0; i < 4; ++i) raw += (x[i] - ref[i]).squared_norm();
  EXPECT_DOUBLE_EQ(std::sqrt(raw / 4), 1.0);

  double oracle = std::min(rotation_search_rmsd(x, ref), rotation_search_rmsd(mirrored(x), ref));
  double got = rmsd(x, ref);
  EXPECT_LE(got, 1.0);
  EXPECT_LE(got, oracle + 1e-12);
  EXPECT_NEAR(got, oracle, 1e-6);
}

TEST(Rmsd, RandomSetsAgainstRotationSearch) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 3; ++trial) {
    auto a = random_points(6, 5, rng());
    auto b = random_points(6, 5, rng());
    double oracle = std::min(rotation_search_rmsd(a, b), rotation_search_rmsd(mirrored(a), b));
    EXPECT_NEAR(rmsd(a, b), oracle, 1e-6);
  }
}

TEST(WeightedError, ScalesByWeight) {
  auto inst = make_instance(2, {{0, 1, {1, 2, 1.0, 6.0}}});
  auto x = pair_at(2.5);
  EXPECT_DOUBLE_EQ(weighted_edge_error(x, inst, 0), 1.5);
  EXPECT_DOUBLE_EQ(total_weighted_error(x, inst), 1.5);
  EXPECT_DOUBLE_EQ(ldme(x, inst), 0.5);  // ldme ignores weights
}
