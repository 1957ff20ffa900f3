#pragma once

// Exact hull membership for tiny instances by exhaustive face enumeration.
// Every subset of at most d+1 points is tried as a candidate support: the
// query is projected onto the subset's affine hull, the projection is kept
// when its barycentric coordinates are nonnegative, and the minimum distance
// over kept subsets is exact. If the true projection lies on a face, its
// minimal support is affinely independent with at most d+1 points, so the
// enumeration always visits it. Deliberately shares no structure with the
// iterative solver so the two check each other.

#include <bit>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "hullaudit/errors.hpp"
#include "hullaudit/transform.hpp"

namespace hullaudit {

struct OracleResult {
  bool inside = false;
  double exact_distance = 0.0;
  std::vector<std::size_t> support;  // rows of the minimizing face
  Vector barycentric;                // weights over support, same order
  Vector projected;
  std::size_t degenerate_subsets = 0;  // rank-deficient candidates skipped
};

inline constexpr std::size_t kOracleMaxPoints = 12;
inline constexpr std::size_t kOracleMaxDim = 4;

inline OracleResult exact_membership(const Matrix& points, const Vector& q) {
  const std::size_t n = static_cast<std::size_t>(points.rows());
  const std::size_t d = static_cast<std::size_t>(points.cols());
  if (n == 0) throw EmptyTable("oracle needs at least one point");
  if (n > kOracleMaxPoints || d > kOracleMaxDim)
    throw InstanceTooLarge("oracle accepts at most " + std::to_string(kOracleMaxPoints) +
                           " points in dimension at most " + std::to_string(kOracleMaxDim));
  if (q.size() != points.cols())
    throw DimensionMismatch("query has length " + std::to_string(q.size()) +
                            ", points have dimension " + std::to_string(d));

  OracleResult best;
  best.exact_distance = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> subset;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    const std::size_t k = static_cast<std::size_t>(std::popcount(mask));
    if (k > d + 1) continue;
    subset.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) subset.push_back(i);

    Vector beta(k);
    Vector proj(d);
    if (k == 1) {
      beta[0] = 1.0;
      proj = points.row(Eigen::Index(subset[0])).transpose();
    } else {
      // Affine projection: p = b0 + M t with M the difference matrix; the
      // least-squares t gives barycentric (1 - sum t, t).
      Vector b0 = points.row(Eigen::Index(subset[0])).transpose();
      Matrix m(d, k - 1);
      for (std::size_t j = 1; j < k; ++j)
        m.col(Eigen::Index(j - 1)) =
            points.row(Eigen::Index(subset[j])).transpose() - b0;
      Eigen::ColPivHouseholderQR<Matrix> qr(m);
      if (std::size_t(qr.rank()) < k - 1) {
        ++best.degenerate_subsets;
        continue;
      }
      Vector t = qr.solve(q - b0);
      beta[0] = 1.0 - t.sum();
      beta.tail(Eigen::Index(k - 1)) = t;
      proj = b0 + m * t;
    }

    if ((beta.array() < -1e-12).any()) continue;
    const double dist = (q - proj).norm();
    if (dist < best.exact_distance) {
      best.exact_distance = dist;
      best.support = subset;
      best.barycentric = beta;
      best.projected = proj;
    }
  }

  best.inside = best.exact_distance <= 1e-12;
  if (best.inside) best.exact_distance = std::max(best.exact_distance, 0.0);
  return best;
}

}  // namespace hullaudit
