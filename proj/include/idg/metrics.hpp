#pragma once

// Error and quality measures: interval error per edge, LDME, Kabsch
// superposition and RMSD against a reference structure.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>

#include "idg/core.hpp"

namespace idg {

/// Edges whose interval error exceeds this are counted as violating.
inline constexpr double violation_threshold = 1e-9;

inline constexpr bool is_violation(double edge_err) { return edge_err > violation_threshold; }

/// Squared amount by which `length` lies outside [lower, upper].
inline double interval_error(double length, const DistanceConstraint& c) {
  double excess = std::max({c.lower - length, length - c.upper, 0.0});
  return excess * excess;
}

inline double edge_error(std::span<const Vec3> x, const Edge& e, const DistanceConstraint& c) {
  return interval_error(distance(x[e.v], x[e.w]), c);
}

inline double edge_error(std::span<const Vec3> x, const Instance& inst, std::size_t e) {
  return edge_error(x, inst.graph.edge(e), inst.constraints[e]);
}

/// Error scaled by the constraint's weight; equals edge_error for unit weights.
inline double weighted_edge_error(std::span<const Vec3> x, const Instance& inst, std::size_t e) {
  return inst.constraints[e].weight * edge_error(x, inst, e);
}

/// Root of the mean squared interval error over all edges.
inline double ldme(std::span<const Vec3> x, const Instance& inst) {
  if (inst.edge_count() == 0) throw ValidationError("ldme of an instance without edges");
  double sum = 0;
  for (std::size_t e = 0; e < inst.edge_count(); ++e) sum += edge_error(x, inst, e);
  return std::sqrt(sum / static_cast<double>(inst.edge_count()));
}

inline double total_weighted_error(std::span<const Vec3> x, const Instance& inst) {
  double sum = 0;
  for (std::size_t e = 0; e < inst.edge_count(); ++e) sum += weighted_edge_error(x, inst, e);
  return sum;
}

struct ViolationStats {
  std::size_t count = 0;
  double fraction = 0;
  double max_error = 0;
};

inline ViolationStats violation_stats(std::span<const Vec3> x, const Instance& inst) {
  ViolationStats s;
  for (std::size_t e = 0; e < inst.edge_count(); ++e) {
    double err = edge_error(x, inst, e);
    s.max_error = std::max(s.max_error, err);
    if (is_violation(err)) ++s.count;
  }
  if (inst.edge_count() > 0)
    s.fraction = static_cast<double>(s.count) / static_cast<double>(inst.edge_count());
  return s;
}

// ---------------------------------------------------------------------------
// superposition

struct SuperpositionResult {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double rmsd = 0;

  /// Applies the fitted transform: maps a point of the moving set onto the
  /// target frame.
  Vec3 apply(const Vec3& p) const {
    Eigen::Vector3d r = rotation * Eigen::Vector3d(p.x, p.y, p.z) + translation;
    return {r.x(), r.y(), r.z()};
  }
};

/// Finds the proper rigid motion (R, t) minimizing sum |R p_i + t - q_i|^2.
/// Uses the SVD of the 3x3 cross-covariance with a determinant correction so
/// R never contains a reflection.
inline SuperpositionResult kabsch_superpose(std::span<const Vec3> moving,
                                            std::span<const Vec3> target) {
  if (moving.size() != target.size())
    throw ValidationError("kabsch_superpose: point sets differ in size");
  if (moving.empty()) throw ValidationError("kabsch_superpose: empty point sets");

  const auto n = static_cast<double>(moving.size());
  Eigen::Vector3d cm = Eigen::Vector3d::Zero(), ct = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < moving.size(); ++i) {
    cm += Eigen::Vector3d(moving[i].x, moving[i].y, moving[i].z);
    ct += Eigen::Vector3d(target[i].x, target[i].y, target[i].z);
  }
  cm /= n;
  ct /= n;

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < moving.size(); ++i) {
    Eigen::Vector3d p = Eigen::Vector3d(moving[i].x, moving[i].y, moving[i].z) - cm;
    Eigen::Vector3d q = Eigen::Vector3d(target[i].x, target[i].y, target[i].z) - ct;
    h += p * q.transpose();
  }

  SuperpositionResult res;
  if (h.cwiseAbs().maxCoeff() > 0) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix3d& u = svd.matrixU();
    const Eigen::Matrix3d& v = svd.matrixV();
    Eigen::Matrix3d fix = Eigen::Matrix3d::Identity();
    fix(2, 2) = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;
    res.rotation = v * fix * u.transpose();
  }
  res.translation = ct - res.rotation * cm;

  double sum = 0;
  for (std::size_t i = 0; i < moving.size(); ++i)
    sum += (res.apply(moving[i]) - target[i]).squared_norm();
  res.rmsd = std::sqrt(sum / n);
  return res;
}

inline Embedding mirrored(std::span<const Vec3> x) {
  Embedding m(x.begin(), x.end());
  for (auto& p : m) p.z = -p.z;
  return m;
}

/// RMSD after optimal superposition. Distances cannot tell a structure from
/// its mirror image, so both handednesses are tried and the smaller value
/// returned.
inline double rmsd(std::span<const Vec3> x, std::span<const Vec3> reference) {
  if (x.size() != reference.size()) throw ValidationError("rmsd: embeddings differ in size");
  double direct = kabsch_superpose(x, reference).rmsd;
  double mirror = kabsch_superpose(mirrored(x), reference).rmsd;
  return std::min(direct, mirror);
}

}  // namespace idg
