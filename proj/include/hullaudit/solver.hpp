#pragma once

// Convex hull membership and Euclidean projection. The projection minimizes
// f(w) = 1/2 ||A^T w - q||^2 over the probability simplex with conditional
// gradient methods; every linear-minimization step is one pass over the
// training rows, so memory stays O(n + d) and the dataset can be large.
//
// Verdicts carry certificates that are checkable independently of solver
// convergence: an Inside verdict stores the witness convex combination, an
// Outside verdict stores a separating hyperplane whose margin is recomputed
// by a fresh scan over all rows.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hullaudit/errors.hpp"
#include "hullaudit/transform.hpp"

namespace hullaudit {

enum class Variant { vanilla_fw, away_step_fw, corrective_fw };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::vanilla_fw: return "vanilla_fw";
    case Variant::away_step_fw: return "away_step_fw";
    case Variant::corrective_fw: return "corrective_fw";
  }
  return "away_step_fw";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "vanilla_fw") return Variant::vanilla_fw;
  if (s == "away_step_fw") return Variant::away_step_fw;
  if (s == "corrective_fw") return Variant::corrective_fw;
  throw Error("unknown solver variant '" + s + "'");
}

struct SolverConfig {
  // Relative duality-gap stop; the absolute threshold also never exceeds
  // tau^2/4, so an inside query converges far enough to certify Inside.
  double gap_tolerance = 1e-10;
  double membership_tolerance = 1e-6;  // tau, in transformed units
  std::size_t max_iterations = 0;      // 0 picks 50*n capped at 1e6
  Variant variant = Variant::away_step_fw;
  std::uint64_t seed = 0;  // consumed by instance generators, not the solver

  void validate() const {
    if (!(gap_tolerance > 0)) throw Error("gap_tolerance must be positive");
    if (!(membership_tolerance > 0))
      throw Error("membership_tolerance must be positive");
  }

  std::size_t iteration_cap(std::size_t n) const {
    if (max_iterations > 0) return max_iterations;
    return std::min<std::size_t>(50 * std::max<std::size_t>(n, 1), 1000000);
  }
};

struct Projection {
  std::vector<std::pair<std::size_t, double>> weights;  // index order, all > 0
  Vector projected;  // p* = sum of weighted training rows
  Vector residual;   // q - p*
  double distance = 0.0;
  double final_gap = 0.0;  // absolute duality gap at the returned point
  std::size_t iterations = 0;
  bool converged = false;
};

// f(w) - f* <= final_gap, so the true hull distance is at least this.
inline double distance_lower_bound(const Projection& p) {
  return std::sqrt(std::max(0.0, p.distance * p.distance - 2.0 * p.final_gap));
}

enum class Status { Inside, Outside, Indeterminate };

inline std::string to_string(Status s) {
  switch (s) {
    case Status::Inside: return "Inside";
    case Status::Outside: return "Outside";
    case Status::Indeterminate: return "Indeterminate";
  }
  return "Indeterminate";
}

// Separating hyperplane evidence for an Outside verdict. margin is
// normal.q - max_i normal.a_i, recomputed by a fresh pass over the rows;
// floor is the round-off allowance that margin must clear.
struct OutsideCertificate {
  Vector normal;
  double margin = 0.0;
  double floor = 0.0;
  std::size_t nearest_row = 0;  // argmax of normal.a_i
};

struct MembershipVerdict {
  Status status = Status::Indeterminate;
  Projection projection;
  std::optional<OutsideCertificate> certificate;  // Outside only
};

// Per-iteration objective values, for convergence diagnostics.
struct SolverTrace {
  std::vector<double> objectives;
};

namespace detail {

// Argmin over rows of <row, g>, ties to the lowest index.
inline std::size_t lmo_full(const Matrix& a, const Vector& g, double* min_score) {
  Vector scores = a * g;
  std::size_t best = 0;
  double bv = scores[0];
  for (Eigen::Index i = 1; i < scores.size(); ++i)
    if (scores[i] < bv) {
      bv = scores[i];
      best = std::size_t(i);
    }
  *min_score = bv;
  return best;
}

inline std::size_t nearest_row(const Matrix& a, const Vector& q) {
  std::size_t best = 0;
  double bv = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double dist = (a.row(i).transpose() - q).squaredNorm();
    if (dist < bv) {
      bv = dist;
      best = std::size_t(i);
    }
  }
  return best;
}

inline Vector combination(const Matrix& a, const std::map<std::size_t, double>& w) {
  Vector p = Vector::Zero(a.cols());
  for (const auto& [i, wi] : w) p += wi * a.row(Eigen::Index(i)).transpose();
  return p;
}

inline void renormalize(std::map<std::size_t, double>& w) {
  double s = 0.0;
  for (const auto& [i, wi] : w) s += wi;
  if (s > 0)
    for (auto& [i, wi] : w) wi /= s;
}

// Shared finishing step: rebuild p from the weights, rescan all rows for an
// honest final gap, and package the result.
inline Projection finish(const Matrix& a, const Vector& q,
                         std::map<std::size_t, double> w, std::size_t iterations,
                         double gap_thresh) {
  for (auto it = w.begin(); it != w.end();)
    it = it->second > 0.0 ? std::next(it) : w.erase(it);
  renormalize(w);

  Projection out;
  out.projected = combination(a, w);
  out.residual = q - out.projected;
  out.distance = out.residual.norm();
  double min_score = 0.0;
  lmo_full(a, out.projected - q, &min_score);
  out.final_gap =
      std::max(0.0, out.projected.dot(out.projected - q) - min_score);
  out.iterations = iterations;
  out.converged = out.final_gap <= gap_thresh;
  out.weights.assign(w.begin(), w.end());
  return out;
}

// One affine-hull projection for the corrective inner solve: minimize over
// combinations of the active vertices that sum to one, signs unconstrained.
// Returns false for a rank-deficient active set.
inline bool affine_weights(const Matrix& a, const std::vector<std::size_t>& active,
                           const Vector& q, Vector* beta) {
  const std::size_t k = active.size();
  if (k == 1) {
    *beta = Vector::Ones(1);
    return true;
  }
  const Vector b0 = a.row(Eigen::Index(active[0])).transpose();
  Matrix m(a.cols(), Eigen::Index(k - 1));
  for (std::size_t j = 1; j < k; ++j)
    m.col(Eigen::Index(j - 1)) = a.row(Eigen::Index(active[j])).transpose() - b0;
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  if (std::size_t(qr.rank()) < k - 1) return false;
  const Vector t = qr.solve(q - b0);
  beta->resize(Eigen::Index(k));
  (*beta)[0] = 1.0 - t.sum();
  beta->tail(Eigen::Index(k - 1)) = t;
  return true;
}

// Exact projection onto the hull of alpha's vertices via minimum-norm-point
// minor cycles: each cycle either accepts the affine minimizer or moves until
// a weight hits zero and drops that vertex, so it terminates. Zero-weight
// entries participate and may gain weight; entries at zero on exit are
// removed. A rank-deficient set sheds its smallest weight, preferring to keep
// the lower row index on ties.
inline void reoptimize_active(const Matrix& a, const Vector& q,
                              std::map<std::size_t, double>& alpha) {
  std::vector<std::size_t> active;
  std::vector<double> w;
  active.reserve(alpha.size());
  w.reserve(alpha.size());
  for (const auto& [i, wi] : alpha) {
    active.push_back(i);
    w.push_back(wi);
  }

  const std::size_t max_cycles = active.size() + 2;
  for (std::size_t cycle = 0; cycle <= max_cycles && active.size() > 1; ++cycle) {
    Vector beta;
    if (!affine_weights(a, active, q, &beta)) {
      std::size_t drop = 0;
      for (std::size_t j = 1; j < active.size(); ++j)
        if (w[j] < w[drop] || (w[j] == w[drop] && active[j] > active[drop]))
          drop = j;
      active.erase(active.begin() + std::ptrdiff_t(drop));
      w.erase(w.begin() + std::ptrdiff_t(drop));
      continue;
    }
    if ((beta.array() >= 0.0).all()) {
      for (std::size_t j = 0; j < active.size(); ++j) w[j] = beta[Eigen::Index(j)];
      break;
    }
    // Step from the current feasible weights toward beta until a weight
    // reaches zero, then drop that vertex.
    double theta = 1.0;
    std::size_t drop = active.size();
    for (std::size_t j = 0; j < active.size(); ++j) {
      const double tgt = beta[Eigen::Index(j)];
      if (tgt < w[j]) {
        const double step = w[j] / (w[j] - tgt);
        if (step < theta) {
          theta = step;
          drop = j;
        }
      }
    }
    for (std::size_t j = 0; j < active.size(); ++j)
      w[j] += theta * (beta[Eigen::Index(j)] - w[j]);
    if (drop < active.size()) {
      active.erase(active.begin() + std::ptrdiff_t(drop));
      w.erase(w.begin() + std::ptrdiff_t(drop));
    }
  }

  alpha.clear();
  if (active.size() == 1) {
    alpha[active[0]] = 1.0;
    return;
  }
  for (std::size_t j = 0; j < active.size(); ++j)
    if (w[j] > 0.0) alpha[active[j]] = w[j];
  renormalize(alpha);
}

// Vanilla and away-step conditional gradient. The away step moves mass off
// the worst active vertex, which restores linear convergence when the
// optimum sits on a face. Away runs interleave periodic exact re-solves over
// the active set, which finish the within-face work the away steps would
// otherwise crawl through.
inline Projection project_fw(const Matrix& a, const Vector& q, bool with_away,
                             double gap_thresh, std::size_t cap, SolverTrace* trace) {
  const std::size_t init = nearest_row(a, q);
  std::map<std::size_t, double> alpha{{init, 1.0}};
  Vector p = a.row(Eigen::Index(init)).transpose();

  std::size_t it = 0;
  for (; it < cap; ++it) {
    const Vector g = p - q;
    if (trace) trace->objectives.push_back(0.5 * g.squaredNorm());
    Vector scores = a * g;
    std::size_t v = 0;
    double sv = scores[0];
    for (Eigen::Index i = 1; i < scores.size(); ++i)
      if (scores[i] < sv) {
        sv = scores[i];
        v = std::size_t(i);
      }
    const double pg = p.dot(g);
    const double gap = pg - sv;
    if (gap <= gap_thresh) break;

    bool away = false;
    std::size_t u = 0;
    if (with_away) {
      double su = -std::numeric_limits<double>::infinity();
      for (const auto& [i, wi] : alpha)
        if (scores[Eigen::Index(i)] > su) {
          su = scores[Eigen::Index(i)];
          u = i;
        }
      away = (su - pg) > gap && alpha.size() > 1;
    }

    if (!away) {
      const Vector dir = a.row(Eigen::Index(v)).transpose() - p;
      const double denom = dir.squaredNorm();
      if (denom <= 0.0) break;  // p coincides with the target vertex
      const double gamma = std::clamp((q - p).dot(dir) / denom, 0.0, 1.0);
      if (gamma >= 1.0) {
        alpha.clear();
        alpha[v] = 1.0;
        p = a.row(Eigen::Index(v)).transpose();
      } else if (gamma > 0.0) {
        for (auto& [i, wi] : alpha) wi *= 1.0 - gamma;
        alpha[v] += gamma;
        p += gamma * dir;
      } else {
        break;  // no descent along the step; gap is essentially round-off
      }
    } else {
      const double au = alpha[u];
      const double gmax = au / (1.0 - au);
      const Vector dir = p - a.row(Eigen::Index(u)).transpose();
      const double denom = dir.squaredNorm();
      if (denom <= 0.0 || !std::isfinite(gmax)) break;
      const double gamma = std::clamp((q - p).dot(dir) / denom, 0.0, gmax);
      if (gamma <= 0.0) break;
      for (auto& [i, wi] : alpha) wi *= 1.0 + gamma;
      alpha[u] -= gamma;
      if (gamma >= gmax * (1.0 - 1e-12) || alpha[u] <= 0.0) alpha.erase(u);
      p += gamma * dir;
    }

    if (with_away && (it & 15u) == 15u) {
      // Periodic exact re-solve over the active set. Away steps assemble the
      // right support quickly but then crawl toward the optimum on it; the
      // correction finishes that part of the work outright. Guarded so a
      // degenerate active set can never push the objective back up.
      std::map<std::size_t, double> corrected = alpha;
      reoptimize_active(a, q, corrected);
      const Vector cp = combination(a, corrected);
      if ((cp - q).squaredNorm() <= (p - q).squaredNorm()) {
        alpha = std::move(corrected);
        p = cp;
      }
    } else if ((it & 127u) == 127u) {
      renormalize(alpha);
      p = combination(a, alpha);  // shed accumulated drift
    }
  }
  if (with_away && !alpha.empty()) {
    std::map<std::size_t, double> corrected = alpha;
    reoptimize_active(a, q, corrected);
    if ((combination(a, corrected) - q).squaredNorm() <= (p - q).squaredNorm())
      alpha = std::move(corrected);
  }
  return finish(a, q, std::move(alpha), it, gap_thresh);
}

// Fully corrective variant. Works against a pool of the rows nearest the
// query: the inner loop solves the subproblem over the active vertices to
// optimality (minimum-norm-point style minor cycles), the pool supplies new
// vertices cheaply, and a full pass over all rows certifies the pool's
// answer globally before the solver is allowed to stop.
inline Projection project_corrective(const Matrix& a, const Vector& q,
                                     double gap_thresh, std::size_t cap,
                                     SolverTrace* trace) {
  const std::size_t n = std::size_t(a.rows());
  const std::size_t d = std::size_t(a.cols());
  const std::size_t pool_target =
      std::min<std::size_t>(n, std::max<std::size_t>(128, 4 * d));

  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  if (pool_target < n) {
    Vector dist2 = (a.rowwise() - q.transpose()).rowwise().squaredNorm();
    std::nth_element(pool.begin(), pool.begin() + Eigen::Index(pool_target),
                     pool.end(), [&](std::size_t x, std::size_t y) {
                       return dist2[Eigen::Index(x)] != dist2[Eigen::Index(y)]
                                  ? dist2[Eigen::Index(x)] < dist2[Eigen::Index(y)]
                                  : x < y;
                     });
    pool.resize(pool_target);
    std::sort(pool.begin(), pool.end());
  }

  std::map<std::size_t, double> alpha{{nearest_row(a, q), 1.0}};

  std::size_t it = 0;
  bool done = false;
  while (!done && it < cap) {
    ++it;
    reoptimize_active(a, q, alpha);
    const Vector p = combination(a, alpha);
    if (trace) trace->objectives.push_back(0.5 * (p - q).squaredNorm());

    // Pool step: feed the best pool vertex to the active set while the pool
    // still shows a gap.
    const Vector g = p - q;
    const double pg = p.dot(g);
    std::size_t pv = pool[0];
    double ps = std::numeric_limits<double>::infinity();
    for (std::size_t i : pool) {
      const double s = a.row(Eigen::Index(i)).dot(g);
      if (s < ps) {
        ps = s;
        pv = i;
      }
    }
    if (pg - ps > gap_thresh) {
      if (!alpha.count(pv)) {
        alpha[pv] = 0.0;  // enters the next inner solve with positive weight
      } else {
        done = true;  // pool's best is already active and optimal over it
      }
      if (!done) continue;
    }

    // Global certification pass; only an all-rows gap may end the solve.
    double min_score = 0.0;
    const std::size_t gv = lmo_full(a, g, &min_score);
    if (pg - min_score <= gap_thresh) {
      done = true;
    } else if (!alpha.count(gv)) {
      alpha[gv] = 0.0;
      if (std::find(pool.begin(), pool.end(), gv) == pool.end()) pool.push_back(gv);
      done = false;
    } else {
      done = true;  // gap is round-off level; the active solve is optimal
    }
  }
  return finish(a, q, std::move(alpha), it, gap_thresh);
}

inline void check_query(const Matrix& a, const Vector& q) {
  if (q.size() != a.cols())
    throw DimensionMismatch("query has length " + std::to_string(q.size()) +
                            ", dataset dimension is " + std::to_string(a.cols()));
  if (!q.allFinite()) throw NonFiniteInput("query vector has non-finite entries");
}

inline double effective_gap_threshold(const SolverConfig& cfg, double f0) {
  const double tau = cfg.membership_tolerance;
  return std::min(cfg.gap_tolerance * std::max(1.0, f0), 0.25 * tau * tau);
}

inline Projection project_impl(const Matrix& a, const Vector& q,
                               const SolverConfig& cfg, SolverTrace* trace) {
  cfg.validate();
  check_query(a, q);
  const std::size_t n = std::size_t(a.rows());
  if (n == 0) throw EmptyTable("dataset has no rows");

  if (n == 1) {
    // The hull is one point; project directly.
    Projection out;
    out.weights = {{0, 1.0}};
    out.projected = a.row(0).transpose();
    out.residual = q - out.projected;
    out.distance = out.residual.norm();
    out.final_gap = 0.0;
    out.iterations = 0;
    out.converged = true;
    if (trace) trace->objectives.push_back(0.5 * out.distance * out.distance);
    return out;
  }

  const double f0 =
      0.5 * (a.row(Eigen::Index(nearest_row(a, q))).transpose() - q).squaredNorm();
  const double gap_thresh = effective_gap_threshold(cfg, f0);
  const std::size_t cap = cfg.iteration_cap(n);

  switch (cfg.variant) {
    case Variant::vanilla_fw:
      return project_fw(a, q, false, gap_thresh, cap, trace);
    case Variant::away_step_fw:
      return project_fw(a, q, true, gap_thresh, cap, trace);
    case Variant::corrective_fw:
      return project_corrective(a, q, gap_thresh, cap, trace);
  }
  return project_fw(a, q, true, gap_thresh, cap, trace);
}

}  // namespace detail

inline Projection project(const Dataset& data, const Vector& q,
                          const SolverConfig& cfg = {}, SolverTrace* trace = nullptr) {
  return detail::project_impl(data.matrix, q, cfg, trace);
}

// Evaluate the hyperplane with the given normal by a fresh pass over all
// rows. Soundness does not depend on where the normal came from: whatever
// the solver did, a positive margin above the round-off floor proves no
// convex combination of rows reaches q.
inline OutsideCertificate certify_outside(const Matrix& a, const Vector& q,
                                          const Vector& normal) {
  detail::check_query(a, q);
  if (normal.size() != a.cols())
    throw DimensionMismatch("normal has length " + std::to_string(normal.size()) +
                            ", dataset dimension is " + std::to_string(a.cols()));
  OutsideCertificate cert;
  cert.normal = normal;
  const double wq = normal.dot(q);
  double best = -std::numeric_limits<double>::infinity();
  double scale = std::abs(wq);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double s = a.row(i).dot(normal);
    if (s > best) {
      best = s;
      cert.nearest_row = std::size_t(i);
    }
    scale = std::max(scale, std::abs(s));
  }
  cert.margin = wq - best;
  cert.floor = 10.0 * std::numeric_limits<double>::epsilon() * scale;
  return cert;
}

inline OutsideCertificate certify_outside(const Dataset& data, const Vector& q,
                                          const Vector& normal) {
  return certify_outside(data.matrix, q, normal);
}

namespace detail {

inline MembershipVerdict classify_impl(const Matrix& a, const Vector& q,
                                       const SolverConfig& cfg) {
  SolverConfig attempt_cfg = cfg;
  Projection proj;
  for (int attempt = 0; attempt < 2; ++attempt) {
    proj = project_impl(a, q, attempt_cfg, nullptr);
    if (proj.distance <= cfg.membership_tolerance) {
      MembershipVerdict v;
      v.status = Status::Inside;
      v.projection = std::move(proj);
      return v;
    }
    if (proj.distance > 0) {
      OutsideCertificate cert = certify_outside(a, q, q - proj.projected);
      if (cert.margin > cert.floor) {
        MembershipVerdict v;
        v.status = Status::Outside;
        v.projection = std::move(proj);
        v.certificate = std::move(cert);
        return v;
      }
    }
    // Inconclusive: one retry at a hundredfold tighter gap before giving up.
    attempt_cfg.gap_tolerance = cfg.gap_tolerance / 100.0;
  }
  MembershipVerdict v;
  v.status = Status::Indeterminate;
  v.projection = std::move(proj);
  return v;
}

}  // namespace detail

inline MembershipVerdict classify(const Dataset& data, const Vector& q,
                                  const SolverConfig& cfg = {}) {
  cfg.validate();
  return detail::classify_impl(data.matrix, q, cfg);
}

struct BatchEntry {
  std::optional<MembershipVerdict> verdict;
  std::string error;  // non-empty when this query failed
};

// Classify each row of queries independently. Failures are recorded in
// place; output order matches input order whatever the job count.
inline std::vector<BatchEntry> batch_classify(const Dataset& data,
                                              const Matrix& queries,
                                              const SolverConfig& cfg = {},
                                              std::size_t jobs = 0) {
  cfg.validate();
  const std::size_t m = std::size_t(queries.rows());
  std::vector<BatchEntry> results(m);
  if (m == 0) return results;
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, m);

  auto run_range = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < m; i += step) {
      try {
        results[i].verdict =
            detail::classify_impl(data.matrix, queries.row(Eigen::Index(i)).transpose(), cfg);
      } catch (const std::exception& e) {
        results[i].error = e.what();
      }
    }
  };

  if (jobs == 1) {
    run_range(0, 1);
  } else {
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (std::size_t t = 0; t < jobs; ++t)
      workers.emplace_back(run_range, t, jobs);
    for (auto& w : workers) w.join();
  }
  return results;
}

}  // namespace hullaudit
