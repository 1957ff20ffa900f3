#pragma once

// Shared generators for the solver, report, and acceptance suites.

#include <Eigen/Dense>

#include "hullaudit/detail/util.hpp"
#include "hullaudit/transform.hpp"

namespace testsupport {

using hullaudit::Matrix;
using hullaudit::Vector;
using hullaudit::detail::Rng;

inline Matrix random_matrix(Eigen::Index n, Eigen::Index d, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Matrix m(n, d);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < d; ++c) m(r, c) = rng.uniform(lo, hi);
  return m;
}

inline Vector random_vector(Eigen::Index d, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Vector v(d);
  for (Eigen::Index c = 0; c < d; ++c) v[c] = rng.uniform(lo, hi);
  return v;
}

inline Vector random_gaussian_vector(Eigen::Index d, Rng& rng) {
  Vector v(d);
  for (Eigen::Index c = 0; c < d; ++c) v[c] = rng.gaussian();
  return v;
}

// A query strictly inside the hull: convex combination of all rows with
// strictly positive weights.
inline Vector interior_point(const Matrix& rows, Rng& rng) {
  Vector w(rows.rows());
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = 0.05 + rng.uniform01();
  w /= w.sum();
  return rows.transpose() * w;
}

// A query strictly outside: push past the vertex farthest from the
// centroid. The point of the hull farthest from any fixed point is always a
// vertex, so stepping beyond it along the outward direction leaves the hull.
inline Vector exterior_point(const Matrix& rows, Rng& rng, double push = 0.5) {
  const Vector centroid = rows.colwise().mean().transpose();
  Eigen::Index far = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double dist = (rows.row(i).transpose() - centroid).norm();
    if (dist > best) {
      best = dist;
      far = i;
    }
  }
  const Vector a = rows.row(far).transpose();
  const double lambda = push * (0.5 + rng.uniform01());
  return a + lambda * (a - centroid);
}

// Invertible affine map with singular values drawn to keep the condition
// number at or below cond_max.
struct AffineMap {
  Matrix linear;
  Vector offset;
  double smin = 1.0;
  double smax = 1.0;

  Vector operator()(const Vector& x) const { return linear * x + offset; }
  Matrix apply_rows(const Matrix& rows) const {
    Matrix out = rows * linear.transpose();
    out.rowwise() += offset.transpose();
    return out;
  }
};

inline AffineMap random_affine(Eigen::Index d, Rng& rng, double cond_max) {
  const double spread = std::sqrt(cond_max);
  Matrix g1 = random_matrix(d, d, rng), g2 = random_matrix(d, d, rng);
  for (Eigen::Index i = 0; i < d * d; ++i) {
    g1(i / d, i % d) = rng.gaussian();
    g2(i / d, i % d) = rng.gaussian();
  }
  Matrix q1 = Eigen::HouseholderQR<Matrix>(g1).householderQ();
  Matrix q2 = Eigen::HouseholderQR<Matrix>(g2).householderQ();
  AffineMap map;
  Vector s(d);
  map.smin = std::numeric_limits<double>::infinity();
  map.smax = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    // Log-uniform in [1/spread, spread] keeps the ratio within cond_max.
    s[i] = std::exp(rng.uniform(-std::log(spread), std::log(spread)));
    map.smin = std::min(map.smin, s[i]);
    map.smax = std::max(map.smax, s[i]);
  }
  map.linear = q1 * s.asDiagonal() * q2.transpose();
  map.offset = random_vector(d, rng, -2.0, 2.0);
  return map;
}

}  // namespace testsupport
