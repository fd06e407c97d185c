#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "idg/laplacian.hpp"
#include "idg/octree.hpp"
#include "support.hpp"

using namespace idg;
using idg::testing::random_points;

namespace {

Eigen::MatrixXd dense(const LaplacianSystem& L) {
  Eigen::MatrixXd m(L.n, L.n);
  for (Index r = 0; r < L.n; ++r)
    for (Index c = 0; c < L.n; ++c) m(r, c) = L.entry(r, c);
  return m;
}

// Minimum-norm solution through the SVD pseudo-inverse.
Eigen::VectorXd pinv_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  return svd.solve(b);
}

Vec3 brute_entropy(std::span<const Vec3> x, Index v, double q) {
  Vec3 f;
  for (Index u = 0; u < x.size(); ++u) {
    if (u == v) continue;
    double dx = x[v].x - x[u].x, dy = x[v].y - x[u].y, dz = x[v].z - x[u].z;
    double r = std::sqrt(dx * dx + dy * dy + dz * dz);
    double s = (q >= 0 ? 1.0 : -1.0) / std::pow(r, q + 2);
    f += Vec3{dx, dy, dz} * s;
  }
  return f;
}

}  // namespace

TEST(Laplacian, PathOfTwo) {
  auto g = build_graph(2, {{0, 1}});
  std::vector<double> w{1.0};
  auto L = assemble_laplacian(g, w);
  EXPECT_EQ(L.entry(0, 0), 1.0);
  EXPECT_EQ(L.entry(0, 1), -1.0);
  EXPECT_EQ(L.entry(1, 0), -1.0);
  EXPECT_EQ(L.entry(1, 1), 1.0);
}

TEST(Laplacian, TriangleAndStar) {
  std::vector<double> ones(3, 1.0), twos(3, 2.0);
  auto t = assemble_laplacian(build_graph(3, {{0, 1}, {1, 2}, {0, 2}}), ones);
  for (Index r = 0; r < 3; ++r)
    for (Index c = 0; c < 3; ++c) EXPECT_EQ(t.entry(r, c), r == c ? 2.0 : -1.0);
  auto s = assemble_laplacian(build_graph(4, {{0, 1}, {0, 2}, {0, 3}}), twos);
  EXPECT_EQ(s.entry(0, 0), 6.0);
  EXPECT_EQ(s.entry(1, 1), 2.0);
}

TEST(Laplacian, RowSumsVanish) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 10);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = build_graph(40, idg::testing::random_connected_pairs(40, 60, rng));
    std::vector<double> w(g.edge_count());
    for (auto& x : w) x = u(rng);
    auto L = assemble_laplacian(g, w);
    auto m = dense(L);
    for (Index r = 0; r < 40; ++r) EXPECT_LT(std::abs(m.row(r).sum()), 1e-12);
    EXPECT_EQ((m - m.transpose()).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Laplacian, RejectsBadWeights) {
  auto g = build_graph(2, {{0, 1}});
  std::vector<double> zero{0.0}, nan{std::nan("")}, few{};
  EXPECT_THROW(assemble_laplacian(g, zero), ValidationError);
  EXPECT_THROW(assemble_laplacian(g, nan), ValidationError);
  EXPECT_THROW(assemble_laplacian(g, few), ValidationError);
}

TEST(SolveCg, TwoPathHandSolve) {
  std::vector<double> w{1.0}, b{1.0, -1.0};
  auto L = assemble_laplacian(build_graph(2, {{0, 1}}), w);
  auto res = solve_cg(L, b, 1e-12, 100);
  EXPECT_NEAR(res.x[0], 0.5, 1e-12);
  EXPECT_NEAR(res.x[1], -0.5, 1e-12);
  EXPECT_TRUE(res.converged);
}

TEST(SolveCg, ZeroRightHandSide) {
  std::vector<double> w(3, 1.0), b(3, 0.0), guess{5, 6, 7};
  auto L = assemble_laplacian(build_graph(3, {{0, 1}, {1, 2}, {0, 2}}), w);
  auto res = solve_cg(L, b, 1e-10, 100, guess);
  for (double v : res.x) EXPECT_EQ(v, 0.0);
}

TEST(SolveCg, NonFiniteRightHandSideThrows) {
  std::vector<double> w{1.0}, b{1.0, std::numeric_limits<double>::infinity()};
  auto L = assemble_laplacian(build_graph(2, {{0, 1}}), w);
  EXPECT_THROW(solve_cg(L, b, 1e-10, 100), NumericalError);
}

TEST(SolveCg, MatchesDensePseudoInverse) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.05, 5), ub(-3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 49;
    auto g = build_graph(n, idg::testing::random_connected_pairs(n, rng() % (2 * n), rng));
    std::vector<double> w(g.edge_count());
    for (auto& x : w) x = u(rng);
    auto L = assemble_laplacian(g, w);
    std::vector<double> b(n);
    for (auto& x : b) x = ub(rng);
    auto res = solve_cg(L, b, 1e-12, 5000);
    Eigen::VectorXd eb = Eigen::Map<Eigen::VectorXd>(b.data(), n);
    Eigen::VectorXd oracle = pinv_solve(dense(L), eb);
    oracle.array() -= oracle.mean();
    Eigen::VectorXd got = Eigen::Map<Eigen::VectorXd>(res.x.data(), n);
    got.array() -= got.mean();
    EXPECT_LT((got - oracle).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
  }
}

TEST(SolveCg, ResidualWithinToleranceOnProjectedRhs) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = build_graph(30, idg::testing::random_connected_pairs(30, 20, rng));
    std::vector<double> w(g.edge_count(), 1.0), b(30);
    for (auto& x : b) x = static_cast<double>(rng() % 100) - 50;
    auto L = assemble_laplacian(g, w);
    const double tol = 1e-6;
    auto res = solve_cg(L, b, tol, 1000);
    std::vector<double> bp = b, lx(30);
    L.project(bp);
    L.multiply(res.x, lx);
    double rn = 0, bn = 0;
    for (int i = 0; i < 30; ++i) rn += (lx[i] - bp[i]) * (lx[i] - bp[i]), bn += bp[i] * bp[i];
    EXPECT_LE(std::sqrt(rn), tol * std::sqrt(bn));
  }
}

TEST(SolveCg, DisconnectedComponentsEachCentered) {
  std::vector<double> w{1.0, 2.0}, b{1, -1, 3, 5};
  auto L = assemble_laplacian(build_graph(4, {{0, 1}, {2, 3}}), w);
  EXPECT_EQ(L.component_count, 2u);
  auto res = solve_cg(L, b, 1e-12, 100);
  EXPECT_NEAR(res.x[0] + res.x[1], 0.0, 1e-12);
  EXPECT_NEAR(res.x[2] + res.x[3], 0.0, 1e-12);
  // component {2,3}: b projected to (-1, 1), 2 (x2 - x3) = -1
  EXPECT_NEAR(res.x[2] - res.x[3], -0.5, 1e-12);
}

TEST(Octree, SinglePoint) {
  Embedding x{{1, 2, 3}};
  Octree t(x);
  EXPECT_EQ(t.nodes().size(), 1u);
  EXPECT_TRUE(t.root().leaf);
  EXPECT_EQ(t.root().centroid.x, 1.0);
  EXPECT_EQ(t.root().centroid.z, 3.0);
  auto f = t.entropy_force(0, 0.0, 0.6);
  EXPECT_EQ(f.norm(), 0.0);
}

TEST(Octree, CubeCornersCentroid) {
  Embedding x;
  for (int i = 0; i < 8; ++i) x.push_back({double(i & 1), double((i >> 1) & 1), double((i >> 2) & 1)});
  Octree t(x);
  EXPECT_NEAR(t.root().centroid.x, 0.5, 1e-15);
  EXPECT_NEAR(t.root().centroid.y, 0.5, 1e-15);
  EXPECT_NEAR(t.root().centroid.z, 0.5, 1e-15);
  std::size_t leaves = 0;
  for (const auto& n : t.nodes()) leaves += n.leaf;
  EXPECT_EQ(leaves, 8u);
}

TEST(Octree, CoincidentPointsShareLeaf) {
  Embedding x{{1, 1, 1}, {1, 1, 1}};
  Octree t(x);
  std::size_t leaves = 0;
  for (const auto& n : t.nodes())
    if (n.leaf) {
      ++leaves;
      EXPECT_EQ(n.count, 2u);
    }
  EXPECT_EQ(leaves, 1u);
  // a third distinct point still separates
  x.push_back({2, 2, 2});
  Octree t2(x);
  bool shared = false;
  for (const auto& n : t2.nodes()) shared = shared || (n.leaf && n.count == 2);
  EXPECT_TRUE(shared);
}

TEST(Octree, EveryPointInExactlyOneLeaf) {
  auto x = random_points(500, 10, 3);
  Octree t(x);
  std::vector<int> seen(x.size(), 0);
  for (const auto& n : t.nodes())
    if (n.leaf)
      for (auto i : t.leaf_points(n)) {
        ++seen[i];
        EXPECT_TRUE(n.contains(x[i]));
      }
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(EntropyForce, TwoPointsRepel) {
  const double r = 2.5;
  Embedding x{{0, 0, 0}, {r, 0, 0}};
  Octree t(x);
  auto f = t.entropy_force(0, 0.0, 0.0);
  EXPECT_NEAR(f.x, -1.0 / r, 1e-15);
  EXPECT_EQ(f.y, 0.0);
  EXPECT_EQ(f.z, 0.0);
}

TEST(EntropyForce, SignConvention) {
  Embedding x{{0, 0, 0}, {2, 0, 0}};
  EXPECT_LT(pair_entropy_force(x[0], x[1], 0, 1, 0.8).x, 0.0);   // repulsive
  EXPECT_GT(pair_entropy_force(x[0], x[1], 0, 1, -0.5).x, 0.0);  // attractive
  // q = 0.8: magnitude r^{-(q+1)}
  EXPECT_NEAR(pair_entropy_force(x[0], x[1], 0, 1, 0.8).norm(), std::pow(2.0, -1.8), 1e-15);
}

TEST(EntropyForce, CoincidentPairPushApart) {
  Embedding x{{1, 1, 1}, {1, 1, 1}};
  auto f0 = pair_entropy_force(x[0], x[1], 0, 1, 0.0);
  auto f1 = pair_entropy_force(x[1], x[0], 1, 0, 0.0);
  EXPECT_NEAR(f0.norm(), coincident_force, 1e-15);
  EXPECT_EQ((f0 + f1).norm(), 0.0);
}

TEST(EntropyForce, ThetaZeroMatchesBruteForce) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto x = random_points(20, 10, seed);
    Octree t(x);
    for (double q : {0.0, 0.8, -0.5})
      for (Index v = 0; v < x.size(); ++v) {
        auto got = t.entropy_force(v, q, 0.0);
        auto want = brute_entropy(x, v, q);
        EXPECT_LT((got - want).norm(), 1e-9 * std::max(1.0, want.norm()));
      }
  }
}

TEST(EntropyForce, NonNeighborSumMatchesBruteForce) {
  std::mt19937_64 rng(4);
  auto x = random_points(60, 10, 9);
  auto g = build_graph(60, idg::testing::random_connected_pairs(60, 80, rng));
  for (double q : {0.0, 0.8}) {
    auto exact = entropy_forces(g, x, {q, 0.0, true, false, 1});
    auto tree0 = entropy_forces(g, x, {q, 0.0, false, false, 1});
    for (Index v = 0; v < 60; ++v) {
      Vec3 want;
      for (Index u = 0; u < 60; ++u)
        if (u != v && !g.adjacent(u, v)) want += pair_entropy_force(x[v], x[u], v, u, q);
      EXPECT_LT((exact[v] - want).norm(), 1e-12);
      EXPECT_LT((tree0[v] - want).norm(), 1e-9);
    }
  }
}

TEST(EntropyForce, PairSumIsZero) {
  std::mt19937_64 rng(6);
  auto x = random_points(80, 10, 12);
  auto g = build_graph(80, idg::testing::random_connected_pairs(80, 50, rng));
  auto f = entropy_forces(g, x, {0.0, 0.0, true, false, 1});
  Vec3 total;
  for (const auto& v : f) total += v;
  EXPECT_LT(total.norm(), 1e-8);
}

TEST(EntropyForce, NormalizationDividesByNonNeighborCount) {
  std::mt19937_64 rng(1);
  auto x = random_points(30, 10, 2);
  auto g = build_graph(30, idg::testing::random_connected_pairs(30, 10, rng));
  auto raw = entropy_forces(g, x, {0.0, 0.0, true, false, 1});
  auto norm = entropy_forces(g, x, {0.0, 0.0, true, true, 1});
  for (Index v = 0; v < 30; ++v) {
    double others = 29.0 - static_cast<double>(g.degree(v));
    EXPECT_NEAR((raw[v] / others - norm[v]).norm(), 0.0, 1e-15);
  }
}

TEST(EntropyForce, BarnesHutWithinFivePercentAtHalf) {
  double worst_mean = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto x = random_points(100, 20, 100 + seed);
    Octree t(x);
    double sum = 0;
    for (Index v = 0; v < 100; ++v) {
      auto want = t.entropy_force(v, 0.0, 0.0);
      auto got = t.entropy_force(v, 0.0, 0.5);
      sum += (got - want).norm() / want.norm();
    }
    worst_mean = std::max(worst_mean, sum / 100);
  }
  EXPECT_LT(worst_mean, 0.05);
}

TEST(EntropyForce, ThreadCountDoesNotChangeResult) {
  std::mt19937_64 rng(8);
  auto x = random_points(300, 15, 5);
  auto g = build_graph(300, idg::testing::random_connected_pairs(300, 300, rng));
  auto one = entropy_forces(g, x, {0.0, 0.6, false, true, 1});
  auto four = entropy_forces(g, x, {0.0, 0.6, false, true, 4});
  for (Index v = 0; v < 300; ++v) {
    EXPECT_EQ(one[v].x, four[v].x);
    EXPECT_EQ(one[v].y, four[v].y);
    EXPECT_EQ(one[v].z, four[v].z);
  }
}
